#include "ukan/params.hpp"

#include <cmath>

namespace ukan {

Tensor ParameterStore::add(const std::string& name, Tensor t) {
    if (find(name)) throw Error("duplicate parameter name '" + name + "'");
    t.set_requires_grad(true);
    entries_.emplace_back(name, t);
    return t;
}

const Tensor* ParameterStore::find(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return &t;
    return nullptr;
}

Tensor* ParameterStore::find(const std::string& name) {
    for (auto& [n, t] : entries_)
        if (n == name) return &t;
    return nullptr;
}

std::int64_t ParameterStore::element_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.second.numel();
    return n;
}

Tensor Initializer::kaiming_uniform(Shape shape, std::int64_t fan_in, double gain) {
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape), dtype_);
    dispatch(dtype_, [&]<class T>(T) {
        for (auto& v : t.mutable_data<T>()) v = static_cast<T>(dist(rng_));
    });
    return t;
}

Tensor Initializer::normal(Shape shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape), dtype_);
    dispatch(dtype_, [&]<class T>(T) {
        for (auto& v : t.mutable_data<T>()) v = static_cast<T>(dist(rng_));
    });
    return t;
}

}  // namespace ukan
