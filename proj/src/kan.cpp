#include "ukan/kan.hpp"

#include <cmath>

#include "ukan/nn.hpp"
#include "ukan/ops.hpp"

namespace ukan {

void SplineGrid::validate() const {
    if (!(hi > lo)) throw Error("spline grid needs lo < hi");
    if (intervals < 1) throw Error("spline grid needs at least one interval");
    if (order < 0) throw Error("spline order must be non-negative");
}

std::vector<double> SplineGrid::knots() const {
    std::vector<double> t(intervals + 2 * order + 1);
    for (int i = 0; i < static_cast<int>(t.size()); ++i) t[i] = knot(i);
    return t;
}

namespace {

// Index m of the knot cell [t_m, t_{m+1}) containing x, or -1 outside the
// stored knot span. The cell ending at `hi` is closed on the right.
int find_cell(double x, const SplineGrid& g) {
    const int last = g.intervals + 2 * g.order;  // index of final knot
    if (x == g.hi) return g.intervals + g.order - 1;
    if (!(x >= g.knot(0)) || !(x < g.knot(last))) return -1;
    int m = static_cast<int>(std::floor((x - g.lo) / g.spacing())) + g.order;
    m = std::clamp(m, 0, last - 1);
    while (m > 0 && x < g.knot(m)) --m;
    while (m < last - 1 && x >= g.knot(m + 1)) ++m;
    return m;
}

// Nonzero basis values N[0..p] of order p on cell m (bases m-p .. m).
// Runs on the local coordinate u in [0, 1] with integer knot offsets, so every
// factor is non-negative and values outside the support are exactly zero.
void cell_basis(double x, int m, int p, const SplineGrid& g, double* N) {
    const double u = std::clamp((x - g.knot(m)) / g.spacing(), 0.0, 1.0);
    double left[16], right[16];
    N[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u + (j - 1);
        right[j] = j - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = N[r] / (right[r + 1] + left[j - r]);
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }
}

}  // namespace

void bspline_basis(double x, const SplineGrid& grid, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const int m = find_cell(x, grid);
    if (m < 0) return;
    const int p = grid.order;
    if (p > 14) throw Error("spline order too large");
    double N[16];
    cell_basis(x, m, p, grid, N);
    const int nb = grid.basis_count();
    for (int r = 0; r <= p; ++r) {
        const int j = m - p + r;
        if (j >= 0 && j < nb) out[j] = N[r];
    }
}

void bspline_basis_derivative(double x, const SplineGrid& grid, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const int p = grid.order;
    if (p == 0) return;
    const int m = find_cell(x, grid);
    if (m < 0) return;
    double N[16];
    cell_basis(x, m, p - 1, grid, N);  // order p-1 bases m-p+1 .. m
    const double inv_h = 1.0 / grid.spacing();
    const int nb = grid.basis_count();
    // dB_{j,p} = (B_{j,p-1} - B_{j+1,p-1}) / h on a uniform grid.
    for (int r = 0; r <= p; ++r) {
        const int j = m - p + r;
        if (j < 0 || j >= nb) continue;
        const double lower = (r >= 1) ? N[r - 1] : 0.0;  // B_{j,p-1}
        const double upper = (r <= p - 1) ? N[r] : 0.0;  // B_{j+1,p-1}
        out[j] = (lower - upper) * inv_h;
    }
}

std::vector<double> bspline_basis(std::span<const double> xs, const SplineGrid& grid) {
    grid.validate();
    const std::size_t nb = grid.basis_count();
    std::vector<double> out(xs.size() * nb);
    for (std::size_t i = 0; i < xs.size(); ++i)
        bspline_basis(xs[i], grid, std::span<double>(out.data() + i * nb, nb));
    return out;
}

Tensor spline_features(const Tensor& x, const SplineGrid& grid) {
    grid.validate();
    if (x.rank() != 2) throw ShapeError("spline_features expects [N, d]");
    const std::int64_t nb = grid.basis_count();
    Tensor out({x.dim(0), x.dim(1), nb}, x.dtype());
    Tensor deriv({x.dim(0), x.dim(1), nb}, x.dtype());
    dispatch(x.dtype(), [&]<class T>(T) {
        auto xs = x.data<T>();
        auto o = out.mutable_data<T>();
        auto d = deriv.mutable_data<T>();
        std::vector<double> b(nb), db(nb);
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            bspline_basis(static_cast<double>(xs[i]), grid, b);
            bspline_basis_derivative(static_cast<double>(xs[i]), grid, db);
            for (std::int64_t j = 0; j < nb; ++j) {
                o[i * nb + j] = static_cast<T>(b[j]);
                d[i * nb + j] = static_cast<T>(db[j]);
            }
        }
    });
    const Shape in_shape = x.shape();
    record_op(out, "spline_features", {&x},
              [deriv, in_shape, nb](const Tensor& g, const std::vector<bool>&, std::vector<Tensor>& grads) {
                  Tensor gx(in_shape, deriv.dtype());
                  dispatch(deriv.dtype(), [&]<class T>(T) {
                      auto go = g.data<T>();
                      auto d = deriv.data<T>();
                      auto o = gx.mutable_data<T>();
                      for (std::int64_t i = 0; i < gx.numel(); ++i) {
                          T s = 0;
                          for (std::int64_t j = 0; j < nb; ++j) s += go[i * nb + j] * d[i * nb + j];
                          o[i] = s;
                      }
                  });
                  grads[0] = gx;
              });
    return out;
}

KanLayer make_kan_layer(ParameterStore& store, Initializer& init, const std::string& prefix,
                        std::int64_t d_in, std::int64_t d_out, const SplineGrid& grid, bool use_base) {
    grid.validate();
    KanLayer layer;
    layer.d_in = d_in;
    layer.d_out = d_out;
    layer.grid = grid;
    layer.use_base = use_base;
    if (use_base)
        layer.base_weight = store.add(prefix + ".base_weight",
                                      init.kaiming_uniform({d_out, d_in}, d_in, std::sqrt(2.0)));
    const double sd = 0.1 / std::sqrt(static_cast<double>(grid.basis_count()));
    layer.spline_coeffs = store.add(prefix + ".spline_coeffs", init.normal({d_out, d_in, grid.basis_count()}, sd));
    return layer;
}

Tensor kan_layer_forward(const Tensor& x, const KanLayer& layer) {
    if (x.rank() != 2 || x.dim(1) != layer.d_in)
        throw ShapeError("kan layer expects [N, " + std::to_string(layer.d_in) + "], got " +
                         shape_str(x.shape()));
    const std::int64_t n = x.dim(0), nb = layer.grid.basis_count();
    Tensor basis = reshape(spline_features(x, layer.grid), {n, layer.d_in * nb});
    Tensor coeffs_t = permute(reshape(layer.spline_coeffs, {layer.d_out, layer.d_in * nb}), {1, 0});
    Tensor out = matmul(basis, coeffs_t);
    if (layer.use_base) out = add(matmul(silu(x), permute(layer.base_weight, {1, 0})), out);
    return out;
}

TokKanBlock make_tok_kan_block(ParameterStore& store, Initializer& init, const std::string& prefix,
                               std::int64_t in_channels, std::int64_t embed_dim, int stride,
                               const SplineGrid& grid, bool use_base) {
    TokKanBlock b;
    b.in_channels = in_channels;
    b.embed_dim = embed_dim;
    b.stride = stride;
    b.patch_weight = store.add(prefix + ".patch.weight",
                               init.kaiming_uniform({embed_dim, in_channels, 3, 3, 3}, in_channels * 27, 1.0));
    b.patch_bias = store.add(prefix + ".patch.bias", init.zeros({embed_dim}));
    b.kan = make_kan_layer(store, init, prefix + ".kan", embed_dim, embed_dim, grid, use_base);
    b.dw_weight = store.add(prefix + ".dw.weight", init.kaiming_uniform({embed_dim, 1, 3, 3, 3}, 27, 1.0));
    b.norm_gain = store.add(prefix + ".norm.gain", init.ones({embed_dim}));
    b.norm_offset = store.add(prefix + ".norm.offset", init.zeros({embed_dim}));
    return b;
}

Tensor patch_embed(const Tensor& x, const TokKanBlock& block) {
    if (x.rank() != 5) throw ShapeError("tokenize expects [B,C,D,H,W]");
    for (int a = 2; a < 5; ++a)
        if (x.dim(a) % block.stride != 0)
            throw ShapeError("tokenize: spatial extents " + shape_str(x.shape()) +
                             " not divisible by stride " + std::to_string(block.stride));
    return convolve(x, block.patch_weight, block.patch_bias, ConvSpec::same3d(3, block.stride));
}

Tensor grid_to_tokens(const Tensor& x) {
    const std::int64_t B = x.dim(0), E = x.dim(1), T = x.numel() / (B * E);
    return permute(reshape(x, {B, E, T}), {0, 2, 1});
}

Tensor tokens_to_grid(const Tensor& tokens, std::int64_t d, std::int64_t h, std::int64_t w) {
    if (tokens.rank() != 3 || tokens.dim(1) != d * h * w)
        throw ShapeError("tokens_to_grid: token count does not match grid");
    return reshape(permute(tokens, {0, 2, 1}), {tokens.dim(0), tokens.dim(2), d, h, w});
}

Tensor tokenize(const Tensor& x, const TokKanBlock& block) { return grid_to_tokens(patch_embed(x, block)); }

Tensor tok_kan_block(const Tensor& x, const TokKanBlock& block) {
    Tensor feat = patch_embed(x, block);
    const std::int64_t B = feat.dim(0), E = feat.dim(1);
    const std::int64_t d = feat.dim(2), h = feat.dim(3), w = feat.dim(4);
    Tensor tokens = grid_to_tokens(feat);
    Tensor mixed = kan_layer_forward(reshape(tokens, {B * d * h * w, E}), block.kan);
    Tensor spatial = tokens_to_grid(reshape(mixed, {B, d * h * w, E}), d, h, w);
    ConvSpec dw = ConvSpec::same3d(3);
    dw.groups = static_cast<int>(E);
    Tensor local = convolve(spatial, block.dw_weight, std::nullopt, dw);
    return normalize(add(feat, local), NormKind::layer, block.norm_gain, block.norm_offset);
}

}  // namespace ukan
