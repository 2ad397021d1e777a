#include "ukan/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "ukan/ops.hpp"

namespace ukan {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Canonical 3-D view of a convolution problem.
struct ConvGeom {
    std::int64_t batch, cin, cout, groups;
    std::int64_t in[3], k[3], out[3];
    int stride[3], pad[3];

    std::int64_t cin_g() const { return cin / groups; }
    std::int64_t cout_g() const { return cout / groups; }
    std::int64_t in_vox() const { return in[0] * in[1] * in[2]; }
    std::int64_t out_vox() const { return out[0] * out[1] * out[2]; }
    std::int64_t kvol() const { return k[0] * k[1] * k[2]; }
    std::int64_t rows() const { return cin_g() * kvol(); }
    bool pointwise() const {
        return kvol() == 1 && stride[0] == 1 && stride[1] == 1 && stride[2] == 1 && pad[0] == 0 &&
               pad[1] == 0 && pad[2] == 0;
    }
};

ConvGeom make_geom(const Tensor& input, const Tensor& weight, const ConvSpec& spec) {
    const int sr = spec.spatial_rank;
    if (sr != 1 && sr != 3) throw ShapeError("convolve: spatial rank must be 1 or 3");
    if (input.rank() != sr + 2 || weight.rank() != sr + 2)
        throw ShapeError("convolve: input " + shape_str(input.shape()) + " / weight " +
                         shape_str(weight.shape()) + " do not match spatial rank");
    ConvGeom g{};
    g.batch = input.dim(0);
    g.cin = input.dim(1);
    g.cout = weight.dim(0);
    g.groups = spec.groups;
    if (g.groups <= 0 || g.cin % g.groups != 0 || g.cout % g.groups != 0)
        throw ShapeError("convolve: groups must divide both channel counts");
    if (weight.dim(1) != g.cin / g.groups)
        throw ShapeError("convolve: weight expects " + std::to_string(weight.dim(1)) +
                         " input channels per group, input provides " +
                         std::to_string(g.cin / g.groups));
    for (int a = 0; a < 3; ++a) {
        const int src = sr == 3 ? a : (a == 2 ? 0 : -1);
        g.in[a] = src < 0 ? 1 : input.dim(2 + src);
        g.k[a] = src < 0 ? 1 : weight.dim(2 + src);
        g.stride[a] = src < 0 ? 1 : spec.stride[sr == 3 ? a : 2];
        g.pad[a] = src < 0 ? 0 : spec.padding[sr == 3 ? a : 2];
        if (g.stride[a] <= 0 || g.pad[a] < 0) throw ShapeError("convolve: invalid stride/padding");
        const std::int64_t padded = g.in[a] + 2 * g.pad[a];
        if (g.k[a] > padded) throw ShapeError("convolve: kernel larger than padded input");
        g.out[a] = (padded - g.k[a]) / g.stride[a] + 1;
    }
    return g;
}

// Output positions are processed in chunks of whole (od, oh) rows so the
// column buffer stays bounded.
std::int64_t rows_per_chunk(const ConvGeom& g) {
    constexpr std::int64_t budget = std::int64_t{1} << 22;
    const std::int64_t per_row = g.rows() * g.out[2];
    return std::max<std::int64_t>(1, std::min<std::int64_t>(g.out[0] * g.out[1], budget / per_row));
}

template <class T>
void im2col(const ConvGeom& g, const T* in, std::int64_t row_begin, std::int64_t row_count, T* col) {
    const std::int64_t ncols = row_count * g.out[2];
    std::int64_t r = 0;
    for (std::int64_t c = 0; c < g.cin_g(); ++c)
        for (std::int64_t kd = 0; kd < g.k[0]; ++kd)
            for (std::int64_t kh = 0; kh < g.k[1]; ++kh)
                for (std::int64_t kw = 0; kw < g.k[2]; ++kw, ++r) {
                    T* dst = col + r * ncols;
                    for (std::int64_t q = 0; q < row_count; ++q) {
                        const std::int64_t od = (row_begin + q) / g.out[1];
                        const std::int64_t oh = (row_begin + q) % g.out[1];
                        const std::int64_t id = od * g.stride[0] - g.pad[0] + kd;
                        const std::int64_t ih = oh * g.stride[1] - g.pad[1] + kh;
                        T* row = dst + q * g.out[2];
                        if (id < 0 || id >= g.in[0] || ih < 0 || ih >= g.in[1]) {
                            std::fill_n(row, g.out[2], T(0));
                            continue;
                        }
                        const T* src = in + (c * g.in[0] + id) * g.in[1] * g.in[2] + ih * g.in[2];
                        for (std::int64_t ow = 0; ow < g.out[2]; ++ow) {
                            const std::int64_t iw = ow * g.stride[2] - g.pad[2] + kw;
                            row[ow] = (iw >= 0 && iw < g.in[2]) ? src[iw] : T(0);
                        }
                    }
                }
}

template <class T>
void col2im(const ConvGeom& g, const T* col, std::int64_t row_begin, std::int64_t row_count, T* in) {
    const std::int64_t ncols = row_count * g.out[2];
    std::int64_t r = 0;
    for (std::int64_t c = 0; c < g.cin_g(); ++c)
        for (std::int64_t kd = 0; kd < g.k[0]; ++kd)
            for (std::int64_t kh = 0; kh < g.k[1]; ++kh)
                for (std::int64_t kw = 0; kw < g.k[2]; ++kw, ++r) {
                    const T* src = col + r * ncols;
                    for (std::int64_t q = 0; q < row_count; ++q) {
                        const std::int64_t od = (row_begin + q) / g.out[1];
                        const std::int64_t oh = (row_begin + q) % g.out[1];
                        const std::int64_t id = od * g.stride[0] - g.pad[0] + kd;
                        const std::int64_t ih = oh * g.stride[1] - g.pad[1] + kh;
                        if (id < 0 || id >= g.in[0] || ih < 0 || ih >= g.in[1]) continue;
                        T* dst = in + (c * g.in[0] + id) * g.in[1] * g.in[2] + ih * g.in[2];
                        const T* row = src + q * g.out[2];
                        for (std::int64_t ow = 0; ow < g.out[2]; ++ow) {
                            const std::int64_t iw = ow * g.stride[2] - g.pad[2] + kw;
                            if (iw >= 0 && iw < g.in[2]) dst[iw] += row[ow];
                        }
                    }
                }
}

template <class T>
void conv_forward(const ConvGeom& g, const T* in, const T* w, const T* bias, T* out) {
    const std::int64_t rows = g.rows(), nvox = g.out_vox(), chunk = rows_per_chunk(g);
    std::vector<T> col;
    for (std::int64_t b = 0; b < g.batch; ++b)
        for (std::int64_t gr = 0; gr < g.groups; ++gr) {
            const T* in_g = in + (b * g.cin + gr * g.cin_g()) * g.in_vox();
            T* out_g = out + (b * g.cout + gr * g.cout_g()) * nvox;
            Eigen::Map<const RowMat<T>> W(w + gr * g.cout_g() * rows, g.cout_g(), rows);
            if (g.pointwise()) {
                Eigen::Map<const RowMat<T>> X(in_g, g.cin_g(), nvox);
                Eigen::Map<RowMat<T>> Y(out_g, g.cout_g(), nvox);
                Y.noalias() = W * X;
            } else {
                for (std::int64_t r0 = 0; r0 < g.out[0] * g.out[1]; r0 += chunk) {
                    const std::int64_t nr = std::min(chunk, g.out[0] * g.out[1] - r0);
                    const std::int64_t nc = nr * g.out[2];
                    col.resize(rows * nc);
                    im2col(g, in_g, r0, nr, col.data());
                    Eigen::Map<const RowMat<T>> C(col.data(), rows, nc);
                    StridedMap<T> Y(out_g + r0 * g.out[2], g.cout_g(), nc, Eigen::OuterStride<>(nvox));
                    Y.noalias() = W * C;
                }
            }
            if (bias)
                for (std::int64_t o = 0; o < g.cout_g(); ++o) {
                    const T bv = bias[gr * g.cout_g() + o];
                    T* p = out_g + o * nvox;
                    for (std::int64_t v = 0; v < nvox; ++v) p[v] += bv;
                }
        }
}

template <class T>
void conv_backward(const ConvGeom& g, const T* in, const T* w, const T* gout, T* gin, T* gw, T* gb) {
    const std::int64_t rows = g.rows(), nvox = g.out_vox(), chunk = rows_per_chunk(g);
    std::vector<T> col, gcol;
    for (std::int64_t b = 0; b < g.batch; ++b)
        for (std::int64_t gr = 0; gr < g.groups; ++gr) {
            const T* in_g = in + (b * g.cin + gr * g.cin_g()) * g.in_vox();
            const T* go_g = gout + (b * g.cout + gr * g.cout_g()) * nvox;
            Eigen::Map<const RowMat<T>> W(w + gr * g.cout_g() * rows, g.cout_g(), rows);
            if (gb)
                for (std::int64_t o = 0; o < g.cout_g(); ++o) {
                    T s = 0;
                    const T* p = go_g + o * nvox;
                    for (std::int64_t v = 0; v < nvox; ++v) s += p[v];
                    gb[gr * g.cout_g() + o] += s;
                }
            if (g.pointwise()) {
                Eigen::Map<const RowMat<T>> X(in_g, g.cin_g(), nvox);
                Eigen::Map<const RowMat<T>> GY(go_g, g.cout_g(), nvox);
                if (gw) {
                    Eigen::Map<RowMat<T>> GW(gw + gr * g.cout_g() * rows, g.cout_g(), rows);
                    GW.noalias() += GY * X.transpose();
                }
                if (gin) {
                    Eigen::Map<RowMat<T>> GX(gin + (b * g.cin + gr * g.cin_g()) * g.in_vox(), g.cin_g(),
                                             nvox);
                    GX.noalias() += W.transpose() * GY;
                }
                continue;
            }
            for (std::int64_t r0 = 0; r0 < g.out[0] * g.out[1]; r0 += chunk) {
                const std::int64_t nr = std::min(chunk, g.out[0] * g.out[1] - r0);
                const std::int64_t nc = nr * g.out[2];
                ConstStridedMap<T> GY(go_g + r0 * g.out[2], g.cout_g(), nc, Eigen::OuterStride<>(nvox));
                if (gw) {
                    col.resize(rows * nc);
                    im2col(g, in_g, r0, nr, col.data());
                    Eigen::Map<const RowMat<T>> C(col.data(), rows, nc);
                    Eigen::Map<RowMat<T>> GW(gw + gr * g.cout_g() * rows, g.cout_g(), rows);
                    GW.noalias() += GY * C.transpose();
                }
                if (gin) {
                    gcol.resize(rows * nc);
                    Eigen::Map<RowMat<T>> GC(gcol.data(), rows, nc);
                    GC.noalias() = W.transpose() * GY;
                    col2im(g, gcol.data(), r0, nr, gin + (b * g.cin + gr * g.cin_g()) * g.in_vox());
                }
            }
        }
}

Shape conv_out_shape(const Tensor& input, const ConvGeom& g, int spatial_rank) {
    Shape s{g.batch, g.cout};
    if (spatial_rank == 1) s.push_back(g.out[2]);
    else s.insert(s.end(), {g.out[0], g.out[1], g.out[2]});
    (void)input;
    return s;
}

}  // namespace

Tensor convolve(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias,
                const ConvSpec& spec) {
    detail::require_same_dtype(input, weight, "convolve");
    const ConvGeom g = make_geom(input, weight, spec);
    if (bias) {
        detail::require_same_dtype(input, *bias, "convolve");
        if (bias->numel() != g.cout) throw ShapeError("convolve: bias must have C_out entries");
    }
    Tensor out(conv_out_shape(input, g, spec.spatial_rank), input.dtype());
    dispatch(input.dtype(), [&]<class T>(T) {
        conv_forward<T>(g, input.data<T>().data(), weight.data<T>().data(),
                        bias ? bias->data<T>().data() : nullptr, out.mutable_data<T>().data());
    });
    Tensor in_s = input.detach(), w_s = weight.detach();
    const bool has_bias = bias.has_value();
    const Shape bias_shape = has_bias ? bias->shape() : Shape{};
    std::vector<const Tensor*> inputs{&input, &weight};
    if (bias) inputs.push_back(&*bias);
    record_op(out, "convolve", inputs,
              [g, in_s, w_s, has_bias, bias_shape](const Tensor& go, const std::vector<bool>& needs,
                                                   std::vector<Tensor>& grads) {
                  Tensor gin, gw, gb;
                  if (needs[0]) gin = Tensor(in_s.shape(), in_s.dtype());
                  if (needs[1]) gw = Tensor(w_s.shape(), w_s.dtype());
                  if (has_bias && needs[2]) gb = Tensor(bias_shape, in_s.dtype());
                  dispatch(in_s.dtype(), [&]<class T>(T) {
                      conv_backward<T>(g, in_s.data<T>().data(), w_s.data<T>().data(),
                                       go.data<T>().data(),
                                       gin.defined() ? gin.mutable_data<T>().data() : nullptr,
                                       gw.defined() ? gw.mutable_data<T>().data() : nullptr,
                                       gb.defined() ? gb.mutable_data<T>().data() : nullptr);
                  });
                  grads[0] = gin;
                  grads[1] = gw;
                  if (has_bias) grads[2] = gb;
              });
    return out;
}

Tensor max_pool3d(const Tensor& input) {
    if (input.rank() != 5) throw ShapeError("max_pool3d expects [B,C,D,H,W]");
    const auto& s = input.shape();
    for (int a = 2; a < 5; ++a)
        if (s[a] % 2 != 0) throw ShapeError("max_pool3d: odd spatial extent in " + shape_str(s));
    const std::int64_t planes = s[0] * s[1], D = s[2], H = s[3], W = s[4];
    const std::int64_t od = D / 2, oh = H / 2, ow = W / 2;
    Tensor out({s[0], s[1], od, oh, ow}, input.dtype());
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());
    dispatch(input.dtype(), [&]<class T>(T) {
        auto x = input.data<T>();
        auto y = out.mutable_data<T>();
        std::int64_t o = 0;
        for (std::int64_t p = 0; p < planes; ++p)
            for (std::int64_t d = 0; d < od; ++d)
                for (std::int64_t h = 0; h < oh; ++h)
                    for (std::int64_t w = 0; w < ow; ++w, ++o) {
                        std::int64_t best = -1;
                        for (int kd = 0; kd < 2; ++kd)
                            for (int kh = 0; kh < 2; ++kh)
                                for (int kw = 0; kw < 2; ++kw) {
                                    const std::int64_t i =
                                        ((p * D + 2 * d + kd) * H + 2 * h + kh) * W + 2 * w + kw;
                                    if (best < 0 || x[i] > x[best]) best = i;
                                }
                        y[o] = x[best];
                        (*argmax)[o] = best;
                    }
    });
    const Shape in_shape = s;
    const DType dt = input.dtype();
    record_op(out, "max_pool3d", {&input},
              [argmax, in_shape, dt](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  Tensor gi(in_shape, dt);
                  dispatch(dt, [&]<class T>(T) {
                      auto go = g.data<T>();
                      auto d = gi.mutable_data<T>();
                      for (std::size_t o = 0; o < argmax->size(); ++o) d[(*argmax)[o]] += go[o];
                  });
                  grads[0] = gi;
              });
    return out;
}

namespace {

struct Taps {
    std::vector<std::int64_t> lo, hi;
    std::vector<double> frac;
};

Taps linear_taps(std::int64_t n_in, int factor) {
    Taps t;
    const std::int64_t n_out = n_in * factor;
    for (std::int64_t o = 0; o < n_out; ++o) {
        double src = (static_cast<double>(o) + 0.5) / factor - 0.5;
        if (src < 0) src = 0;
        auto i0 = static_cast<std::int64_t>(std::floor(src));
        if (i0 > n_in - 1) i0 = n_in - 1;
        t.lo.push_back(i0);
        t.hi.push_back(std::min(i0 + 1, n_in - 1));
        t.frac.push_back(src - static_cast<double>(i0));
    }
    return t;
}

// Resamples one axis of a [outer, n, inner] view.
template <class T>
void resample_axis(const T* src, T* dst, std::int64_t outer, std::int64_t n, std::int64_t inner,
                   const Taps& taps) {
    const std::int64_t m = static_cast<std::int64_t>(taps.lo.size());
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t j = 0; j < m; ++j) {
            const T f = static_cast<T>(taps.frac[j]);
            const T* a = src + (o * n + taps.lo[j]) * inner;
            const T* b = src + (o * n + taps.hi[j]) * inner;
            T* d = dst + (o * m + j) * inner;
            for (std::int64_t i = 0; i < inner; ++i) d[i] = (T(1) - f) * a[i] + f * b[i];
        }
}

template <class T>
void resample_axis_adjoint(const T* gdst, T* gsrc, std::int64_t outer, std::int64_t n,
                           std::int64_t inner, const Taps& taps) {
    const std::int64_t m = static_cast<std::int64_t>(taps.lo.size());
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t j = 0; j < m; ++j) {
            const T f = static_cast<T>(taps.frac[j]);
            T* a = gsrc + (o * n + taps.lo[j]) * inner;
            T* b = gsrc + (o * n + taps.hi[j]) * inner;
            const T* d = gdst + (o * m + j) * inner;
            for (std::int64_t i = 0; i < inner; ++i) {
                a[i] += (T(1) - f) * d[i];
                b[i] += f * d[i];
            }
        }
}

}  // namespace

Tensor trilinear_upsample(const Tensor& input, int factor) {
    if (input.rank() != 5) throw ShapeError("trilinear_upsample expects [B,C,D,H,W]");
    if (factor < 1) throw ShapeError("trilinear_upsample: factor must be positive");
    const auto& s = input.shape();
    const std::int64_t P = s[0] * s[1], D = s[2], H = s[3], W = s[4];
    const std::int64_t f = factor;
    const Taps td = linear_taps(D, factor), th = linear_taps(H, factor), tw = linear_taps(W, factor);
    Tensor out({s[0], s[1], D * f, H * f, W * f}, input.dtype());
    dispatch(input.dtype(), [&]<class T>(T) {
        std::vector<T> a(P * D * H * W * f), b(P * D * H * f * W * f);
        resample_axis(input.data<T>().data(), a.data(), P * D * H, W, 1, tw);
        resample_axis(a.data(), b.data(), P * D, H, W * f, th);
        resample_axis(b.data(), out.mutable_data<T>().data(), P, D, H * f * W * f, td);
    });
    const Shape in_shape = s;
    const DType dt = input.dtype();
    record_op(out, "trilinear_upsample", {&input},
              [=](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  Tensor gi(in_shape, dt);
                  dispatch(dt, [&]<class T>(T) {
                      std::vector<T> b(P * D * H * f * W * f, T(0)), a(P * D * H * W * f, T(0));
                      resample_axis_adjoint(g.data<T>().data(), b.data(), P, D, H * f * W * f, td);
                      resample_axis_adjoint(b.data(), a.data(), P * D, H, W * f, th);
                      resample_axis_adjoint(a.data(), gi.mutable_data<T>().data(), P * D * H, W, 1, tw);
                  });
                  grads[0] = gi;
              });
    return out;
}

Tensor global_avg_pool(const Tensor& input) {
    if (input.rank() < 3) throw ShapeError("global_avg_pool expects [B,C,spatial...]");
    std::vector<int> axes;
    for (int a = 2; a < input.rank(); ++a) axes.push_back(a);
    return reduce(input, ReduceKind::mean, axes);
}

namespace {

// Statistics groups: `groups` independent sets of `count` elements; element
// e of group q lives at base(q) + e * step.
struct NormLayout {
    std::int64_t batch, channels, positions;
    bool layer;

    std::int64_t groups() const { return layer ? batch * positions : batch * channels; }
    std::int64_t count() const { return layer ? channels : positions; }
    std::int64_t step() const { return layer ? positions : 1; }
    std::int64_t base(std::int64_t q) const {
        if (layer) return (q / positions) * channels * positions + q % positions;
        return q * positions;
    }
    std::int64_t channel(std::int64_t q, std::int64_t e) const { return layer ? e : q % channels; }
};

}  // namespace

Tensor normalize(const Tensor& input, NormKind kind, const Tensor& gain, const Tensor& offset,
                 double epsilon) {
    detail::require_same_dtype(input, gain, "normalize");
    detail::require_same_dtype(input, offset, "normalize");
    if (input.rank() < 2) throw ShapeError("normalize expects rank >= 2");
    const std::int64_t C = input.dim(1);
    if (gain.numel() != C || offset.numel() != C)
        throw ShapeError("normalize: gain/offset must have " + std::to_string(C) + " entries");
    if (kind == NormKind::instance && input.rank() < 3)
        throw ShapeError("normalize: instance mode needs spatial axes");
    NormLayout L{input.dim(0), C, input.numel() / (input.dim(0) * C), kind == NormKind::layer};

    Tensor out(input.shape(), input.dtype());
    Tensor xhat(input.shape(), input.dtype());
    Tensor inv_std({L.groups()}, input.dtype());
    dispatch(input.dtype(), [&]<class T>(T) {
        auto x = input.data<T>();
        auto y = out.mutable_data<T>();
        auto xh = xhat.mutable_data<T>();
        auto is = inv_std.mutable_data<T>();
        auto gn = gain.data<T>();
        auto of = offset.data<T>();
        const std::int64_t n = L.count(), st = L.step();
        for (std::int64_t q = 0; q < L.groups(); ++q) {
            const std::int64_t b0 = L.base(q);
            T mean = 0;
            for (std::int64_t e = 0; e < n; ++e) mean += x[b0 + e * st];
            mean /= static_cast<T>(n);
            T var = 0;
            for (std::int64_t e = 0; e < n; ++e) {
                const T d = x[b0 + e * st] - mean;
                var += d * d;
            }
            var /= static_cast<T>(n);
            const T inv = T(1) / std::sqrt(var + static_cast<T>(epsilon));
            is[q] = inv;
            for (std::int64_t e = 0; e < n; ++e) {
                const std::int64_t i = b0 + e * st;
                const std::int64_t c = L.channel(q, e);
                xh[i] = (x[i] - mean) * inv;
                y[i] = gn[c] * xh[i] + of[c];
            }
        }
    });

    Tensor gain_s = gain.detach();
    const Shape gshape = gain.shape(), oshape = offset.shape();
    record_op(out, kind == NormKind::layer ? "layer_norm" : "instance_norm", {&input, &gain, &offset},
              [L, xhat, inv_std, gain_s, gshape, oshape](const Tensor& g, const std::vector<bool>& needs,
                                                         std::vector<Tensor>& grads) {
                  const DType dt = xhat.dtype();
                  Tensor gx(xhat.shape(), dt), gg(gshape, dt), go(oshape, dt);
                  dispatch(dt, [&]<class T>(T) {
                      auto gy = g.data<T>();
                      auto xh = xhat.data<T>();
                      auto is = inv_std.data<T>();
                      auto gn = gain_s.data<T>();
                      auto dx = gx.mutable_data<T>();
                      auto dg = gg.mutable_data<T>();
                      auto dof = go.mutable_data<T>();
                      const std::int64_t n = L.count(), st = L.step();
                      for (std::int64_t q = 0; q < L.groups(); ++q) {
                          const std::int64_t b0 = L.base(q);
                          T m1 = 0, m2 = 0;
                          for (std::int64_t e = 0; e < n; ++e) {
                              const std::int64_t i = b0 + e * st;
                              const std::int64_t c = L.channel(q, e);
                              const T gxh = gy[i] * gn[c];
                              m1 += gxh;
                              m2 += gxh * xh[i];
                              dg[c] += gy[i] * xh[i];
                              dof[c] += gy[i];
                          }
                          m1 /= static_cast<T>(n);
                          m2 /= static_cast<T>(n);
                          for (std::int64_t e = 0; e < n; ++e) {
                              const std::int64_t i = b0 + e * st;
                              const T gxh = gy[i] * gn[L.channel(q, e)];
                              dx[i] = is[q] * (gxh - m1 - xh[i] * m2);
                          }
                      }
                  });
                  if (needs[0]) grads[0] = gx;
                  if (needs[1]) grads[1] = gg;
                  if (needs[2]) grads[2] = go;
              });
    return out;
}

}  // namespace ukan
