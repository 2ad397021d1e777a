#pragma once

#include <span>
#include <vector>

#include "ukan/params.hpp"
#include "ukan/tensor.hpp"

namespace ukan {

// Uniform B-spline grid on [lo, hi] with `intervals` cells, extended by
// `order` knots on each side.
struct SplineGrid {
    double lo = -1.0;
    double hi = 1.0;
    int intervals = 5;
    int order = 3;

    void validate() const;
    double spacing() const { return (hi - lo) / intervals; }
    int basis_count() const { return intervals + order; }
    // Knot i of the (unbounded) uniform sequence; i in [0, G + 2k] is the stored vector.
    double knot(int i) const { return lo + (i - order) * spacing(); }
    std::vector<double> knots() const;
};

// Values of every basis function at x, written to `out` (size basis_count()).
// Cox-de Boor over the extended knots. The last interior cell is closed at
// `hi` so the bases sum to one on the whole of [lo, hi]; outside the knot
// span every value is zero.
void bspline_basis(double x, const SplineGrid& grid, std::span<double> out);
// Derivative d/dx of every basis function at x.
void bspline_basis_derivative(double x, const SplineGrid& grid, std::span<double> out);

// Batch form: returns [xs.size(), basis_count()] row-major.
std::vector<double> bspline_basis(std::span<const double> xs, const SplineGrid& grid);

// Differentiable basis expansion: x [N, d] -> [N, d, basis_count()].
Tensor spline_features(const Tensor& x, const SplineGrid& grid);

struct KanLayer {
    std::int64_t d_in = 0, d_out = 0;
    SplineGrid grid;
    bool use_base = true;
    Tensor base_weight;    // [d_out, d_in]
    Tensor spline_coeffs;  // [d_out, d_in, G + k]
};

KanLayer make_kan_layer(ParameterStore& store, Initializer& init, const std::string& prefix,
                        std::int64_t d_in, std::int64_t d_out, const SplineGrid& grid,
                        bool use_base = true);

// out[n, o] = sum_i base[o,i] * silu(x[n,i]) + sum_i sum_j coeff[o,i,j] * B_j(x[n,i])
Tensor kan_layer_forward(const Tensor& x, const KanLayer& layer);

struct TokKanBlock {
    std::int64_t in_channels = 0, embed_dim = 0;
    int stride = 2;
    Tensor patch_weight;  // [E, C, 3, 3, 3]
    Tensor patch_bias;    // [E]
    KanLayer kan;
    Tensor dw_weight;     // [E, 1, 3, 3, 3]
    Tensor norm_gain;     // [E]
    Tensor norm_offset;   // [E]
};

TokKanBlock make_tok_kan_block(ParameterStore& store, Initializer& init, const std::string& prefix,
                               std::int64_t in_channels, std::int64_t embed_dim, int stride,
                               const SplineGrid& grid, bool use_base = true);

// Patch convolution of the block, as a spatial map [B, E, D/s, H/s, W/s].
Tensor patch_embed(const Tensor& x, const TokKanBlock& block);
// [B, E, d, h, w] <-> [B, T, E] with T = d*h*w in row-major site order.
Tensor grid_to_tokens(const Tensor& x);
Tensor tokens_to_grid(const Tensor& tokens, std::int64_t d, std::int64_t h, std::int64_t w);

Tensor tokenize(const Tensor& x, const TokKanBlock& block);

// LayerNorm(Tok(X) + DwConv(KAN(Tok(X)))), normalized over the embedding axis.
Tensor tok_kan_block(const Tensor& x, const TokKanBlock& block);

}  // namespace ukan
