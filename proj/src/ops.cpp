#include "ukan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ukan {

namespace detail {

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype())
        throw DTypeError(std::string(op) + ": mixed dtypes " + dtype_name(a.dtype()) + " and " +
                         dtype_name(b.dtype()));
}

}  // namespace detail

namespace {

std::vector<std::int64_t> contiguous_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

// Strides of `in` (right-aligned against `out`), zero where `in` broadcasts.
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<std::int64_t> st(out.size(), 0);
    auto cs = contiguous_strides(in);
    std::size_t offset = out.size() - in.size();
    for (std::size_t i = 0; i < in.size(); ++i)
        st[offset + i] = in[i] == 1 && out[offset + i] != 1 ? 0 : cs[i];
    return st;
}

// Visits every output position in row-major order with the matching flat
// offsets into two broadcast operands.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, F&& f) {
    const int rank = static_cast<int>(out.size());
    if (rank == 0) {
        f(0, 0, 0);
        return;
    }
    const std::int64_t inner = out[rank - 1];
    const std::int64_t ia = sa[rank - 1], ib = sb[rank - 1];
    std::vector<std::int64_t> idx(rank, 0);
    std::int64_t o = 0, oa = 0, ob = 0;
    const std::int64_t total = shape_numel(out);
    while (o < total) {
        for (std::int64_t j = 0; j < inner; ++j) f(o + j, oa + j * ia, ob + j * ib);
        o += inner;
        for (int d = rank - 2; d >= 0; --d) {
            ++idx[d];
            oa += sa[d];
            ob += sb[d];
            if (idx[d] < out[d]) break;
            oa -= sa[d] * out[d];
            ob -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

Tensor negate(const Tensor& x) { return scale(x, -1.0); }

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
    std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        std::int64_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        std::int64_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(ea, eb);
    }
    return out;
}

Tensor sum_to_shape(const Tensor& g, const Shape& shape) {
    if (g.shape() == shape) return g;
    Tensor out(shape, g.dtype());
    auto so = broadcast_strides(shape, g.shape());
    auto sg = contiguous_strides(g.shape());
    dispatch(g.dtype(), [&]<class T>(T) {
        auto src = g.data<T>();
        auto dst = out.mutable_data<T>();
        for_each_broadcast(g.shape(), sg, so,
                           [&](std::int64_t, std::int64_t ig, std::int64_t io) { dst[io] += src[ig]; });
    });
    return out;
}

Tensor binary_op(const Tensor& a, const Tensor& b, BinaryKind kind) {
    detail::require_same_dtype(a, b, "binary_op");
    Shape out_shape = broadcast_shape(a.shape(), b.shape());
    Tensor out(out_shape, a.dtype());
    dispatch(a.dtype(), [&]<class T>(T) {
        auto x = a.data<T>();
        auto y = b.data<T>();
        auto z = out.mutable_data<T>();
        auto apply = [kind](T p, T q) -> T {
            switch (kind) {
                case BinaryKind::add: return p + q;
                case BinaryKind::sub: return p - q;
                case BinaryKind::mul: return p * q;
                case BinaryKind::div: return p / q;
            }
            return T{};
        };
        if (a.shape() == b.shape()) {
            for (std::int64_t i = 0; i < out.numel(); ++i) z[i] = apply(x[i], y[i]);
        } else {
            for_each_broadcast(out_shape, broadcast_strides(a.shape(), out_shape),
                               broadcast_strides(b.shape(), out_shape),
                               [&](std::int64_t o, std::int64_t i, std::int64_t j) {
                                   z[o] = apply(x[i], y[j]);
                               });
        }
    });
    static const char* names[] = {"add", "sub", "mul", "div"};
    Tensor a_saved = a.detach(), b_saved = b.detach(), out_saved = out.detach();
    record_op(out, names[static_cast<int>(kind)], {&a, &b},
              [kind, a_saved, b_saved, out_saved](const Tensor& g, const std::vector<bool>& needs,
                                                  std::vector<Tensor>& grads) {
                  const Shape& sa = a_saved.shape();
                  const Shape& sb = b_saved.shape();
                  switch (kind) {
                      case BinaryKind::add:
                          if (needs[0]) grads[0] = sum_to_shape(g, sa);
                          if (needs[1]) grads[1] = sum_to_shape(g, sb);
                          break;
                      case BinaryKind::sub:
                          if (needs[0]) grads[0] = sum_to_shape(g, sa);
                          if (needs[1]) grads[1] = negate(sum_to_shape(g, sb));
                          break;
                      case BinaryKind::mul:
                          if (needs[0]) grads[0] = sum_to_shape(mul(g, b_saved), sa);
                          if (needs[1]) grads[1] = sum_to_shape(mul(g, a_saved), sb);
                          break;
                      case BinaryKind::div:
                          if (needs[0]) grads[0] = sum_to_shape(div(g, b_saved), sa);
                          if (needs[1])
                              grads[1] = negate(sum_to_shape(div(mul(g, out_saved), b_saved), sb));
                          break;
                  }
              });
    return out;
}

Tensor scale(const Tensor& x, double factor) {
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        const T f = static_cast<T>(factor);
        for (std::int64_t i = 0; i < x.numel(); ++i) d[i] = s[i] * f;
    });
    record_op(out, "scale", {&x},
              [factor](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  grads[0] = scale(g, factor);
              });
    return out;
}

Tensor add_scalar(const Tensor& x, double value) {
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        const T v = static_cast<T>(value);
        for (std::int64_t i = 0; i < x.numel(); ++i) d[i] = s[i] + v;
    });
    record_op(out, "add_scalar", {&x},
              [](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  grads[0] = g;
              });
    return out;
}

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

// out[b] = op(a[b]) * op(b[b]) for each batch, optionally transposing operands.
Tensor batched_gemm(const Tensor& a, bool ta, const Tensor& b, bool tb) {
    const bool batched = a.rank() == 3;
    const std::int64_t nb = batched ? a.dim(0) : 1;
    const std::int64_t ar = a.dim(-2), ac = a.dim(-1), br = b.dim(-2), bc = b.dim(-1);
    const std::int64_t m = ta ? ac : ar, k = ta ? ar : ac;
    const std::int64_t k2 = tb ? bc : br, n = tb ? br : bc;
    if (k != k2)
        throw ShapeError("matmul inner dimension mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    Shape os = batched ? Shape{nb, m, n} : Shape{m, n};
    Tensor out(os, a.dtype());
    dispatch(a.dtype(), [&]<class T>(T) {
        auto pa = a.data<T>().data();
        auto pb = b.data<T>().data();
        auto po = out.mutable_data<T>().data();
        for (std::int64_t i = 0; i < nb; ++i) {
            ConstMap<T> A(pa + i * ar * ac, ar, ac);
            ConstMap<T> B(pb + i * br * bc, br, bc);
            MutMap<T> C(po + i * m * n, m, n);
            if (!ta && !tb) C.noalias() = A * B;
            else if (ta && !tb) C.noalias() = A.transpose() * B;
            else if (!ta && tb) C.noalias() = A * B.transpose();
            else C.noalias() = A.transpose() * B.transpose();
        }
    });
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_same_dtype(a, b, "matmul");
    if (!((a.rank() == 2 && b.rank() == 2) || (a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0))))
        throw ShapeError("matmul expects [m,k]x[k,n] or [b,m,k]x[b,k,n], got " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    Tensor out = batched_gemm(a, false, b, false);
    Tensor as = a.detach(), bs = b.detach();
    record_op(out, "matmul", {&a, &b},
              [as, bs](const Tensor& g, const std::vector<bool>& needs, std::vector<Tensor>& grads) {
                  if (needs[0]) grads[0] = batched_gemm(g, false, bs, true);
                  if (needs[1]) grads[1] = batched_gemm(as, true, g, false);
              });
    return out;
}

Tensor activation(const Tensor& x, ActivationKind kind) {
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        const std::int64_t n = x.numel();
        switch (kind) {
            case ActivationKind::relu:
                for (std::int64_t i = 0; i < n; ++i) d[i] = s[i] > T(0) ? s[i] : T(0);
                break;
            case ActivationKind::silu:
                for (std::int64_t i = 0; i < n; ++i) d[i] = s[i] / (T(1) + std::exp(-s[i]));
                break;
            case ActivationKind::sigmoid:
                for (std::int64_t i = 0; i < n; ++i) d[i] = T(1) / (T(1) + std::exp(-s[i]));
                break;
            case ActivationKind::exp:
                for (std::int64_t i = 0; i < n; ++i) d[i] = std::exp(s[i]);
                break;
            case ActivationKind::log:
                for (std::int64_t i = 0; i < n; ++i) d[i] = std::log(s[i]);
                break;
        }
    });
    static const char* names[] = {"relu", "silu", "sigmoid", "exp", "log"};
    Tensor xs = x.detach(), ys = out.detach();
    record_op(out, names[static_cast<int>(kind)], {&x},
              [kind, xs, ys](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  Tensor gi(xs.shape(), xs.dtype());
                  dispatch(xs.dtype(), [&]<class T>(T) {
                      auto gx = gi.mutable_data<T>();
                      auto go = g.data<T>();
                      auto in = xs.data<T>();
                      auto y = ys.data<T>();
                      const std::int64_t n = xs.numel();
                      switch (kind) {
                          case ActivationKind::relu:
                              for (std::int64_t i = 0; i < n; ++i) gx[i] = in[i] > T(0) ? go[i] : T(0);
                              break;
                          case ActivationKind::silu:
                              for (std::int64_t i = 0; i < n; ++i) {
                                  T s = T(1) / (T(1) + std::exp(-in[i]));
                                  gx[i] = go[i] * (s + in[i] * s * (T(1) - s));
                              }
                              break;
                          case ActivationKind::sigmoid:
                              for (std::int64_t i = 0; i < n; ++i) gx[i] = go[i] * y[i] * (T(1) - y[i]);
                              break;
                          case ActivationKind::exp:
                              for (std::int64_t i = 0; i < n; ++i) gx[i] = go[i] * y[i];
                              break;
                          case ActivationKind::log:
                              for (std::int64_t i = 0; i < n; ++i) gx[i] = go[i] / in[i];
                              break;
                      }
                  });
                  grads[0] = gi;
              });
    return out;
}

Tensor clamp_min(const Tensor& x, double lo) {
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        const T l = static_cast<T>(lo);
        for (std::int64_t i = 0; i < x.numel(); ++i) d[i] = s[i] < l ? l : s[i];
    });
    Tensor xs = x.detach();
    record_op(out, "clamp_min", {&x},
              [xs, lo](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  Tensor gi(xs.shape(), xs.dtype());
                  dispatch(xs.dtype(), [&]<class T>(T) {
                      auto s = xs.data<T>();
                      auto go = g.data<T>();
                      auto d = gi.mutable_data<T>();
                      const T l = static_cast<T>(lo);
                      for (std::int64_t i = 0; i < xs.numel(); ++i) d[i] = s[i] < l ? T(0) : go[i];
                  });
                  grads[0] = gi;
              });
    return out;
}

namespace {

struct AxisSplit {
    std::int64_t outer, extent, inner;
};

AxisSplit split_at(const Shape& s, int axis) {
    AxisSplit r{1, s[axis], 1};
    for (int i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

int normalize_axis(int axis, int rank, const char* op) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank)
        throw ShapeError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
    return axis;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
    axis = normalize_axis(axis, x.rank(), "softmax");
    const AxisSplit sp = split_at(x.shape(), axis);
    Tensor out(x.shape(), x.dtype());
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                const std::int64_t base = o * sp.extent * sp.inner + i;
                T mx = s[base];
                for (std::int64_t e = 1; e < sp.extent; ++e) mx = std::max(mx, s[base + e * sp.inner]);
                T total = 0;
                for (std::int64_t e = 0; e < sp.extent; ++e) {
                    T v = std::exp(s[base + e * sp.inner] - mx);
                    d[base + e * sp.inner] = v;
                    total += v;
                }
                for (std::int64_t e = 0; e < sp.extent; ++e) d[base + e * sp.inner] /= total;
            }
    });
    Tensor ys = out.detach();
    record_op(out, "softmax", {&x},
              [ys, sp](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  Tensor gi(ys.shape(), ys.dtype());
                  dispatch(ys.dtype(), [&]<class T>(T) {
                      auto y = ys.data<T>();
                      auto go = g.data<T>();
                      auto d = gi.mutable_data<T>();
                      for (std::int64_t o = 0; o < sp.outer; ++o)
                          for (std::int64_t i = 0; i < sp.inner; ++i) {
                              const std::int64_t base = o * sp.extent * sp.inner + i;
                              T dot = 0;
                              for (std::int64_t e = 0; e < sp.extent; ++e)
                                  dot += go[base + e * sp.inner] * y[base + e * sp.inner];
                              for (std::int64_t e = 0; e < sp.extent; ++e) {
                                  const std::int64_t k = base + e * sp.inner;
                                  d[k] = y[k] * (go[k] - dot);
                              }
                          }
                  });
                  grads[0] = gi;
              });
    return out;
}

Tensor reduce(const Tensor& x, ReduceKind kind, std::vector<int> axes, bool keepdims) {
    const int rank = x.rank();
    std::vector<bool> reduced(rank, false);
    for (int& a : axes) {
        a = normalize_axis(a, rank, "reduce");
        if (reduced[a]) throw ShapeError("reduce: repeated axis");
        reduced[a] = true;
    }
    Shape kept = x.shape();
    std::int64_t count = 1;
    for (int i = 0; i < rank; ++i)
        if (reduced[i]) {
            count *= kept[i];
            kept[i] = 1;
        }
    Shape out_shape;
    if (keepdims) {
        out_shape = kept;
    } else {
        for (int i = 0; i < rank; ++i)
            if (!reduced[i]) out_shape.push_back(kept[i]);
        if (out_shape.empty()) out_shape = {1};
    }

    Tensor out(kept, x.dtype());
    auto sx = contiguous_strides(x.shape());
    auto so = broadcast_strides(kept, x.shape());
    auto argmax = std::make_shared<std::vector<std::int64_t>>();
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        if (kind == ReduceKind::max) {
            argmax->assign(out.numel(), -1);
            for_each_broadcast(x.shape(), sx, so, [&](std::int64_t, std::int64_t ix, std::int64_t io) {
                auto& am = (*argmax)[io];
                if (am < 0 || s[ix] > d[io]) {
                    d[io] = s[ix];
                    am = ix;
                }
            });
        } else {
            for_each_broadcast(x.shape(), sx, so,
                               [&](std::int64_t, std::int64_t ix, std::int64_t io) { d[io] += s[ix]; });
            if (kind == ReduceKind::mean)
                for (auto& v : d) v /= static_cast<T>(count);
        }
    });
    out = out.view_as(out_shape);

    const Shape in_shape = x.shape();
    const DType dt = x.dtype();
    static const char* names[] = {"reduce_sum", "reduce_mean", "reduce_max"};
    record_op(out, names[static_cast<int>(kind)], {&x},
              [kind, kept, in_shape, dt, count, argmax](const Tensor& g, const std::vector<bool>&,
                                                        std::vector<Tensor>& grads) {
                  Tensor gk = g.view_as(kept);
                  Tensor gi(in_shape, dt);
                  dispatch(dt, [&]<class T>(T) {
                      auto go = gk.data<T>();
                      auto d = gi.mutable_data<T>();
                      if (kind == ReduceKind::max) {
                          for (std::size_t o = 0; o < argmax->size(); ++o) d[(*argmax)[o]] += go[o];
                          return;
                      }
                      const T f = kind == ReduceKind::mean ? T(1) / static_cast<T>(count) : T(1);
                      for_each_broadcast(in_shape, contiguous_strides(in_shape),
                                         broadcast_strides(kept, in_shape),
                                         [&](std::int64_t, std::int64_t ix, std::int64_t io) {
                                             d[ix] = go[io] * f;
                                         });
                  });
                  grads[0] = gi;
              });
    return out;
}

Tensor sum_all(const Tensor& x) {
    std::vector<int> axes(x.rank());
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(x, ReduceKind::sum, axes);
}

Tensor mean_all(const Tensor& x) {
    std::vector<int> axes(x.rank());
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(x, ReduceKind::mean, axes);
}

Tensor reshape(const Tensor& x, Shape shape) {
    Tensor out = x.view_as(std::move(shape));
    const Shape in_shape = x.shape();
    record_op(out, "reshape", {&x},
              [in_shape](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  grads[0] = g.view_as(in_shape);
              });
    return out;
}

namespace {

Tensor permute_raw(const Tensor& x, const std::vector<int>& perm) {
    const int rank = x.rank();
    Shape os(rank);
    for (int i = 0; i < rank; ++i) os[i] = x.shape()[perm[i]];
    auto sx = contiguous_strides(x.shape());
    std::vector<std::int64_t> src_strides(rank);
    for (int i = 0; i < rank; ++i) src_strides[i] = sx[perm[i]];
    Tensor out(os, x.dtype());
    std::vector<std::int64_t> zero(rank, 0);
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        for_each_broadcast(os, src_strides, zero,
                           [&](std::int64_t o, std::int64_t i, std::int64_t) { d[o] = s[i]; });
    });
    return out;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
    const int rank = x.rank();
    if (static_cast<int>(perm.size()) != rank) throw ShapeError("permute: rank mismatch");
    std::vector<int> inverse(rank, -1);
    for (int i = 0; i < rank; ++i) {
        if (perm[i] < 0 || perm[i] >= rank || inverse[perm[i]] >= 0)
            throw ShapeError("permute: invalid permutation");
        inverse[perm[i]] = i;
    }
    Tensor out = permute_raw(x, perm);
    record_op(out, "permute", {&x},
              [inverse](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  grads[0] = permute_raw(g, inverse);
              });
    return out;
}

namespace {

Tensor slice_raw(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
    const AxisSplit sp = split_at(x.shape(), axis);
    Shape os = x.shape();
    os[axis] = length;
    Tensor out(os, x.dtype());
    dispatch(x.dtype(), [&]<class T>(T) {
        auto s = x.data<T>();
        auto d = out.mutable_data<T>();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            std::copy_n(s.begin() + (o * sp.extent + start) * sp.inner, length * sp.inner,
                        d.begin() + o * length * sp.inner);
    });
    return out;
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const Tensor& first = parts.front();
    axis = normalize_axis(axis, first.rank(), "concat");
    Shape os = first.shape();
    os[axis] = 0;
    std::vector<std::int64_t> extents;
    for (const auto& p : parts) {
        detail::require_same_dtype(first, p, "concat");
        if (p.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < first.rank(); ++i)
            if (i != axis && p.shape()[i] != first.shape()[i])
                throw ShapeError("concat: extent mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(first.shape()));
        extents.push_back(p.shape()[axis]);
        os[axis] += p.shape()[axis];
    }
    Tensor out(os, first.dtype());
    const AxisSplit so = split_at(os, axis);
    dispatch(first.dtype(), [&]<class T>(T) {
        auto d = out.mutable_data<T>();
        std::int64_t offset = 0;
        for (const auto& p : parts) {
            auto s = p.data<T>();
            const std::int64_t ext = p.shape()[axis];
            for (std::int64_t o = 0; o < so.outer; ++o)
                std::copy_n(s.begin() + o * ext * so.inner, ext * so.inner,
                            d.begin() + (o * so.extent + offset) * so.inner);
            offset += ext;
        }
    });
    std::vector<const Tensor*> inputs;
    for (const auto& p : parts) inputs.push_back(&p);
    record_op(out, "concat", inputs,
              [axis, extents](const Tensor& g, const std::vector<bool>& needs, std::vector<Tensor>& grads) {
                  std::int64_t offset = 0;
                  for (std::size_t i = 0; i < extents.size(); ++i) {
                      if (needs[i]) grads[i] = slice_raw(g, axis, offset, extents[i]);
                      offset += extents[i];
                  }
              });
    return out;
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
    axis = normalize_axis(axis, x.rank(), "slice");
    if (start < 0 || length <= 0 || start + length > x.shape()[axis])
        throw ShapeError("slice out of range on axis " + std::to_string(axis));
    Tensor out = slice_raw(x, axis, start, length);
    const Shape in_shape = x.shape();
    const DType dt = x.dtype();
    record_op(out, "slice", {&x},
              [axis, start, length, in_shape, dt](const Tensor& g, const std::vector<bool>&,
                                                  std::vector<Tensor>& grads) {
                  Tensor gi(in_shape, dt);
                  const AxisSplit sp = split_at(in_shape, axis);
                  dispatch(dt, [&]<class T>(T) {
                      auto s = g.data<T>();
                      auto d = gi.mutable_data<T>();
                      for (std::int64_t o = 0; o < sp.outer; ++o)
                          std::copy_n(s.begin() + o * length * sp.inner, length * sp.inner,
                                      d.begin() + (o * sp.extent + start) * sp.inner);
                  });
                  grads[0] = gi;
              });
    return out;
}

}  // namespace ukan
