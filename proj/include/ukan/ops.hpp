#pragma once

#include <vector>

#include "ukan/tensor.hpp"

namespace ukan {

enum class BinaryKind { add, sub, mul, div };
enum class ActivationKind { relu, silu, sigmoid, exp, log };
enum class ReduceKind { sum, mean, max };

// Broadcasting shape of two operands; an extent of 1 broadcasts.
Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor binary_op(const Tensor& a, const Tensor& b, BinaryKind kind);
inline Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinaryKind::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinaryKind::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinaryKind::mul); }
inline Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinaryKind::div); }

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

// Rank-2 [m,k]x[k,n] or batched rank-3 [b,m,k]x[b,k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor activation(const Tensor& x, ActivationKind kind);
inline Tensor relu(const Tensor& x) { return activation(x, ActivationKind::relu); }
inline Tensor silu(const Tensor& x) { return activation(x, ActivationKind::silu); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, ActivationKind::sigmoid); }

// max(x, lo) elementwise; gradient is zero where the clamp is active.
Tensor clamp_min(const Tensor& x, double lo);

Tensor softmax(const Tensor& x, int axis);

Tensor reduce(const Tensor& x, ReduceKind kind, std::vector<int> axes, bool keepdims = false);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);

// Reduces a broadcast gradient back onto `shape` by summation.
Tensor sum_to_shape(const Tensor& g, const Shape& shape);

namespace detail {
void require_same_dtype(const Tensor& a, const Tensor& b, const char* op);
}

}  // namespace ukan
