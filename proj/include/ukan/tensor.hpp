#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace ukan {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DTypeError : public Error {
public:
    using Error::Error;
};

class AutogradError : public Error {
public:
    using Error::Error;
};

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

const char* dtype_name(DType dt);

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Calls f(T{}) with T = float or double according to the runtime dtype.
template <class F>
decltype(auto) dispatch(DType dt, F&& f) {
    if (dt == DType::f32) return f(float{});
    return f(double{});
}

class Tape;

using LeafId = std::uint64_t;
using NodeId = std::int64_t;

// Dense row-major N-d array. Copies share storage; all operations produce
// fresh storage, so a Tensor is effectively immutable except through
// mutable_data(), which is reserved for construction and optimizer updates.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, DType dtype);

    static Tensor zeros(Shape shape, DType dtype) { return Tensor(std::move(shape), dtype); }
    static Tensor full(Shape shape, double value, DType dtype);
    static Tensor from_vector(Shape shape, const std::vector<double>& values, DType dtype);
    static Tensor from_floats(Shape shape, std::vector<float> values);
    static Tensor from_doubles(Shape shape, std::vector<double> values);
    static Tensor scalar(double value, DType dtype) { return full({1}, value, dtype); }

    bool defined() const { return static_cast<bool>(storage_); }
    const Shape& shape() const { return shape_; }
    std::int64_t dim(int axis) const;
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t numel() const { return numel_; }
    DType dtype() const { return dtype_; }

    template <class T>
    std::span<const T> data() const;
    template <class T>
    std::span<T> mutable_data();

    double item() const;
    double at(std::int64_t flat_index) const;
    std::vector<double> to_vector() const;

    // Same storage, reinterpreted with a new shape of identical element count.
    Tensor view_as(Shape shape) const;
    Tensor clone() const;
    Tensor to(DType dtype) const;

    bool requires_grad() const { return requires_grad_; }
    // Marks the tensor as a trainable leaf; assigns a stable leaf id.
    Tensor& set_requires_grad(bool flag);
    LeafId leaf_id() const { return leaf_id_; }

    // Node on the tape that produced this tensor, if any.
    std::optional<NodeId> node() const;
    std::uint64_t tape_serial() const { return tape_serial_; }

    Tensor detach() const;

    // Internal: attach to a tape node.
    void attach(std::uint64_t tape_serial, NodeId node) {
        tape_serial_ = tape_serial;
        node_ = node;
    }

private:
    using Storage = std::variant<std::vector<float>, std::vector<double>>;

    Shape shape_;
    std::int64_t numel_ = 0;
    DType dtype_ = DType::f32;
    std::shared_ptr<Storage> storage_;
    bool requires_grad_ = false;
    LeafId leaf_id_ = 0;
    NodeId node_ = -1;
    std::uint64_t tape_serial_ = 0;
};

// Gradients accumulated by a backward sweep, keyed by leaf id.
class GradientMap {
public:
    bool contains(const Tensor& leaf) const { return grads_.count(leaf.leaf_id()) > 0; }
    const Tensor& at(const Tensor& leaf) const;
    const Tensor* find(const Tensor& leaf) const;
    std::size_t size() const { return grads_.size(); }

    void set(LeafId id, Tensor grad) { grads_[id] = std::move(grad); }

private:
    std::unordered_map<LeafId, Tensor> grads_;
};

// Computes input gradients from the output gradient. `needs[i]` tells
// whether parent i wants a gradient; unneeded slots may be left undefined.
using BackwardFn = std::function<void(const Tensor& grad_out, const std::vector<bool>& needs,
                                      std::vector<Tensor>& grads)>;

struct TapeNode {
    std::string op;
    std::vector<NodeId> parents;  // -1 marks a non-differentiable input
    BackwardFn backward;
    Shape shape;
    DType dtype = DType::f32;
    std::optional<LeafId> leaf;
};

// Append-only record of differentiable operations. Parents always precede
// children, so a reverse sweep over the node vector is a topological order.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::uint64_t serial() const { return serial_; }
    const std::vector<TapeNode>& nodes() const { return nodes_; }

    // True if `t` should participate in differentiation on this tape.
    bool tracks(const Tensor& t) const;
    NodeId node_for(const Tensor& t);

    void record(Tensor& out, std::string op, const std::vector<const Tensor*>& inputs,
                BackwardFn backward);

    GradientMap backward(const Tensor& loss);

private:
    std::uint64_t serial_;
    std::vector<TapeNode> nodes_;
    std::unordered_map<LeafId, NodeId> leaf_nodes_;
};

// Thread-local active tape. Operations record only while a tape is active.
Tape* active_tape();

class GradScope {
public:
    explicit GradScope(Tape& tape);
    ~GradScope();
    GradScope(const GradScope&) = delete;
    GradScope& operator=(const GradScope&) = delete;

private:
    Tape* previous_;
};

class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

// Records `out` on the active tape when any input is tracked.
void record_op(Tensor& out, const char* op, const std::vector<const Tensor*>& inputs,
               BackwardFn backward);

// Backward over the tape that produced `loss`.
GradientMap backward(const Tensor& loss);

}  // namespace ukan
