#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ukan/tensor.hpp"

namespace ukan {

// Ordered collection of named trainable tensors. Registration order is the
// iteration order used by the optimizer and the checkpoint writer.
class ParameterStore {
public:
    // Registers `t` as trainable under a unique name and returns the stored handle.
    Tensor add(const std::string& name, Tensor t);

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    const Tensor* find(const std::string& name) const;
    Tensor* find(const std::string& name);
    std::int64_t element_count() const;
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

// Seeded parameter initializer; draws happen in call order.
class Initializer {
public:
    Initializer(std::uint64_t seed, DType dtype) : rng_(seed), dtype_(dtype) {}

    DType dtype() const { return dtype_; }

    // U(-b, b) with b = gain * sqrt(3 / fan_in).
    Tensor kaiming_uniform(Shape shape, std::int64_t fan_in, double gain);
    Tensor normal(Shape shape, double stddev);
    Tensor zeros(Shape shape) const { return Tensor::zeros(std::move(shape), dtype_); }
    Tensor ones(Shape shape) const { return Tensor::full(std::move(shape), 1.0, dtype_); }

private:
    std::mt19937_64 rng_;
    DType dtype_;
};

}  // namespace ukan
