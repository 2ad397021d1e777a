#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "ukan/nn.hpp"
#include "ukan/ops.hpp"

using namespace ukan;
using ukan::testing::grad_check;
using ukan::testing::leaf;
using ukan::testing::random_tensor;
using ukan::testing::weighted_sum;

namespace {

// Direct nested-loop 3D cross-correlation with zero padding, stride and groups.
std::vector<double> naive_conv3d(const Tensor& x, const Tensor& w, const std::vector<double>* bias, int stride,
                                 int pad, int groups, Shape& out_shape) {
    const auto xv = x.to_vector(), wv = w.to_vector();
    const std::int64_t B = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
    const std::int64_t O = w.dim(0), Cg = w.dim(1), K = w.dim(2);
    const std::int64_t Og = O / groups;
    const std::int64_t od = (D + 2 * pad - K) / stride + 1, oh = (H + 2 * pad - K) / stride + 1,
                       ow = (W + 2 * pad - K) / stride + 1;
    out_shape = {B, O, od, oh, ow};
    std::vector<double> out(B * O * od * oh * ow, 0.0);
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t o = 0; o < O; ++o)
            for (std::int64_t z = 0; z < od; ++z)
                for (std::int64_t y = 0; y < oh; ++y)
                    for (std::int64_t q = 0; q < ow; ++q) {
                        double acc = bias ? (*bias)[o] : 0.0;
                        const std::int64_t g = o / Og;
                        for (std::int64_t ci = 0; ci < Cg; ++ci)
                            for (std::int64_t kz = 0; kz < K; ++kz)
                                for (std::int64_t ky = 0; ky < K; ++ky)
                                    for (std::int64_t kx = 0; kx < K; ++kx) {
                                        const std::int64_t iz = z * stride - pad + kz, iy = y * stride - pad + ky,
                                                           ix = q * stride - pad + kx;
                                        if (iz < 0 || iz >= D || iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                        const std::int64_t c = g * Cg + ci;
                                        acc += wv[((o * Cg + ci) * K + kz) * K * K + ky * K + kx] *
                                               xv[(((b * C + c) * D + iz) * H + iy) * W + ix];
                                    }
                        out[(((b * O + o) * od + z) * oh + y) * ow + q] = acc;
                    }
    return out;
}

}  // namespace

TEST_CASE("convolve: identity and sum kernels") {
    const Tensor x = random_tensor({1, 1, 3, 4, 5}, 1);
    CHECK(convolve(x, Tensor::full({1, 1, 1, 1, 1}, 1.0, DType::f64), std::nullopt, ConvSpec{}).to_vector() ==
          x.to_vector());
    const Tensor y = convolve(Tensor::full({1, 1, 2, 2, 2}, 1.0, DType::f64), Tensor::full({1, 1, 2, 2, 2}, 1.0, DType::f64),
                              std::nullopt, ConvSpec{});
    CHECK(y.shape() == Shape{1, 1, 1, 1, 1});
    CHECK(y.item() == 8.0);
}

TEST_CASE("convolve matches the nested-loop oracle") {
    struct Case {
        std::int64_t cin, cout, k;
        int stride, pad, groups;
        Shape in;
    };
    const std::vector<Case> cases{
        {2, 3, 3, 1, 1, 1, {2, 2, 4, 5, 6}}, {2, 4, 3, 2, 1, 1, {1, 2, 6, 6, 4}}, {4, 4, 3, 1, 1, 4, {1, 4, 5, 4, 3}},
        {4, 2, 1, 1, 0, 2, {2, 4, 3, 3, 3}}, {3, 2, 2, 2, 0, 1, {1, 3, 4, 4, 4}}, {2, 2, 3, 1, 0, 1, {1, 2, 3, 3, 3}},
    };
    std::uint64_t seed = 0;
    for (const auto& c : cases) {
        const Tensor x = random_tensor(c.in, ++seed);
        const Tensor w = random_tensor({c.cout, c.cin / c.groups, c.k, c.k, c.k}, ++seed);
        const Tensor b = random_tensor({c.cout}, ++seed);
        ConvSpec spec;
        spec.stride = {c.stride, c.stride, c.stride};
        spec.padding = {c.pad, c.pad, c.pad};
        spec.groups = c.groups;
        Shape want_shape;
        const auto bv = b.to_vector();
        const auto want = naive_conv3d(x, w, &bv, c.stride, c.pad, c.groups, want_shape);
        const Tensor got = convolve(x, w, b, spec);
        REQUIRE(got.shape() == want_shape);
        const auto gv = got.to_vector();
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(gv[i] == doctest::Approx(want[i]).epsilon(1e-13));
    }
}

TEST_CASE("depth-wise convolution equals independent per-channel convolution") {
    const Tensor x = random_tensor({1, 3, 4, 4, 4}, 3);
    const Tensor w = random_tensor({3, 1, 3, 3, 3}, 4);
    const Tensor dw = convolve(x, w, std::nullopt, ConvSpec::same3d(3).with_groups(3));
    for (int c = 0; c < 3; ++c) {
        const Tensor single =
            convolve(slice(x, 1, c, 1), slice(w, 0, c, 1), std::nullopt, ConvSpec::same3d(3));
        const auto a = single.to_vector();
        const auto b = slice(dw, 1, c, 1).to_vector();
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
    }
}

TEST_CASE("convolve is linear in the input") {
    const Tensor a = random_tensor({1, 2, 4, 4, 4}, 5), b = random_tensor({1, 2, 4, 4, 4}, 6);
    const Tensor w = random_tensor({3, 2, 3, 3, 3}, 7);
    const auto lhs = convolve(add(a, b), w, std::nullopt, ConvSpec::same3d(3)).to_vector();
    const auto ra = convolve(a, w, std::nullopt, ConvSpec::same3d(3)).to_vector();
    const auto rb = convolve(b, w, std::nullopt, ConvSpec::same3d(3)).to_vector();
    for (std::size_t i = 0; i < lhs.size(); ++i)
        CHECK(std::abs(lhs[i] - (ra[i] + rb[i])) <= 1e-12 * std::max(1.0, std::abs(lhs[i])));
}

TEST_CASE("convolve errors: groups and oversized kernels") {
    ConvSpec bad;
    bad.groups = 2;
    CHECK_THROWS(convolve(Tensor::zeros({1, 3, 4, 4, 4}, DType::f64), Tensor::zeros({2, 1, 1, 1, 1}, DType::f64),
                          std::nullopt, bad));
    CHECK_THROWS(convolve(Tensor::zeros({1, 1, 2, 2, 2}, DType::f64), Tensor::zeros({1, 1, 3, 3, 3}, DType::f64),
                          std::nullopt, ConvSpec{}));
}

TEST_CASE("1D convolution matches direct evaluation") {
    const Tensor x = random_tensor({2, 1, 7}, 8);
    const Tensor w = random_tensor({1, 1, 3}, 9);
    const auto y = convolve(x, w, std::nullopt, ConvSpec::conv1d(1)).to_vector();
    const auto xv = x.to_vector(), wv = w.to_vector();
    for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 7; ++i) {
            double acc = 0;
            for (int k = 0; k < 3; ++k) {
                const int j = i - 1 + k;
                if (j >= 0 && j < 7) acc += wv[k] * xv[b * 7 + j];
            }
            CHECK(y[b * 7 + i] == doctest::Approx(acc).epsilon(1e-14));
        }
}

TEST_CASE("max_pool3d: constants, window max, naive oracle, odd extent") {
    for (double v : max_pool3d(Tensor::full({1, 2, 4, 4, 4}, 2.5, DType::f64)).to_vector()) CHECK(v == 2.5);
    const Tensor win = Tensor::from_doubles({1, 1, 2, 2, 2}, {1, 2, 3, 4, 0, 0, 0, 0});
    CHECK(max_pool3d(win).item() == 4.0);
    const Tensor x = random_tensor({2, 3, 4, 6, 2}, 10);
    const auto y = max_pool3d(x).to_vector();
    const auto xv = x.to_vector();
    std::size_t o = 0;
    for (int bc = 0; bc < 6; ++bc)
        for (int z = 0; z < 2; ++z)
            for (int yy = 0; yy < 3; ++yy)
                for (int q = 0; q < 1; ++q, ++o) {
                    double m = -1e300;
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            for (int c = 0; c < 2; ++c)
                                m = std::max(m, xv[((bc * 4 + 2 * z + a) * 6 + 2 * yy + b) * 2 + 2 * q + c]);
                    CHECK(y[o] == m);
                }
    CHECK_THROWS(max_pool3d(Tensor::zeros({1, 1, 3, 4, 4}, DType::f64)));
}

TEST_CASE("trilinear_upsample: constants, single voxel, ramp closed form") {
    for (double v : trilinear_upsample(Tensor::full({1, 2, 2, 3, 2}, -1.5, DType::f64)).to_vector()) CHECK(v == -1.5);
    const auto one = trilinear_upsample(Tensor::full({1, 1, 1, 1, 1}, 7.0, DType::f64));
    CHECK(one.shape() == Shape{1, 1, 2, 2, 2});
    for (double v : one.to_vector()) CHECK(v == 7.0);

    // ramp along W: value = i; sample position p = (o + 0.5) / 2 - 0.5 clamped to [0, n - 1]
    const std::int64_t n = 5;
    std::vector<double> ramp;
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int i = 0; i < n; ++i) ramp.push_back(3.0 * i + 1.0);
    const auto up = trilinear_upsample(Tensor::from_doubles({1, 1, 2, 2, n}, ramp)).to_vector();
    for (int o = 0; o < 2 * n; ++o) {
        const double p = std::clamp((o + 0.5) / 2.0 - 0.5, 0.0, double(n - 1));
        CHECK(up[o] == doctest::Approx(3.0 * p + 1.0).epsilon(1e-14));
    }
}

TEST_CASE("global_avg_pool: means and permutation invariance") {
    CHECK(global_avg_pool(Tensor::full({1, 1, 2, 2, 2}, 1.0, DType::f64)).item() == 1.0);
    const Tensor seq = Tensor::from_doubles({1, 1, 2, 2, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(global_avg_pool(seq).item() == 3.5);
    CHECK(global_avg_pool(Tensor::from_doubles({1, 1, 2, 2, 2}, {7, 3, 5, 1, 0, 2, 6, 4})).item() == 3.5);
}

TEST_CASE("normalize: constant input, standardized input, output statistics, shape errors") {
    const Tensor one = Tensor::full({2}, 1.0, DType::f64), zero = Tensor::zeros({2}, DType::f64);
    for (double v : normalize(Tensor::full({1, 2, 3, 3, 3}, 4.0, DType::f64), NormKind::instance, one, zero).to_vector())
        CHECK(v == 0.0);
    const auto s = normalize(Tensor::from_doubles({1, 2, 1}, {1, -1}), NormKind::layer, one, zero).to_vector();
    CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(s[1] == doctest::Approx(-1.0).epsilon(1e-4));

    const Tensor x = random_tensor({2, 3, 4, 4, 4}, 12, -3, 5);
    const Tensor g3 = Tensor::full({3}, 1.0, DType::f64), o3 = Tensor::zeros({3}, DType::f64);
    const auto in = normalize(x, NormKind::instance, g3, o3).to_vector();
    for (int bc = 0; bc < 6; ++bc) {
        double m = 0, v = 0;
        for (int i = 0; i < 64; ++i) m += in[bc * 64 + i];
        m /= 64;
        for (int i = 0; i < 64; ++i) v += (in[bc * 64 + i] - m) * (in[bc * 64 + i] - m);
        CHECK(std::abs(m) <= 1e-5);
        CHECK(std::abs(v / 64 - 1) <= 1e-5);
    }
    const Tensor xl = random_tensor({2, 8, 4, 4, 4}, 13, -3, 5);
    const Tensor g8 = Tensor::full({8}, 1.0, DType::f64), o8 = Tensor::zeros({8}, DType::f64);
    const auto ln = normalize(xl, NormKind::layer, g8, o8).to_vector();
    for (int b = 0; b < 2; ++b)
        for (int p = 0; p < 64; ++p) {
            double m = 0, v = 0;
            for (int c = 0; c < 8; ++c) m += ln[(b * 8 + c) * 64 + p];
            m /= 8;
            for (int c = 0; c < 8; ++c) v += std::pow(ln[(b * 8 + c) * 64 + p] - m, 2);
            CHECK(std::abs(m) <= 1e-5);
            CHECK(std::abs(v / 8 - 1) <= 1e-5);
        }
    CHECK_THROWS(normalize(x, NormKind::instance, one, zero));
}

TEST_CASE("gradient check: convolve, pool, upsample, normalize, GAP") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Tensor x = leaf(random_tensor({2, 2, 4, 4, 4}, seed));
        Tensor w = leaf(random_tensor({3, 2, 3, 3, 3}, seed + 1));
        Tensor b = leaf(random_tensor({3}, seed + 2));
        Tensor dw = leaf(random_tensor({2, 1, 3, 3, 3}, seed + 3));
        Tensor w1 = leaf(random_tensor({1, 1, 3}, seed + 4));
        Tensor x1 = leaf(random_tensor({2, 1, 6}, seed + 5));
        Tensor g = leaf(random_tensor({2}, seed + 6, 0.5, 1.5));
        Tensor o = leaf(random_tensor({2}, seed + 7));
        ConvSpec s2 = ConvSpec::same3d(3, 2);
        CHECK(grad_check([&] { return weighted_sum(convolve(x, w, b, ConvSpec::same3d(3)), seed); }, {x, w, b}, seed)
                  .max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(convolve(x, w, b, s2), seed); }, {x, w, b}, seed).max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(convolve(x, dw, std::nullopt, ConvSpec::same3d(3).with_groups(2)), seed); },
                         {x, dw}, seed)
                  .max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(convolve(x1, w1, std::nullopt, ConvSpec::conv1d(1)), seed); },
                         {x1, w1}, seed)
                  .max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(max_pool3d(x), seed); }, {x}, seed).max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(trilinear_upsample(x), seed); }, {x}, seed).max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(global_avg_pool(x), seed); }, {x}, seed).max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(normalize(x, NormKind::instance, g, o), seed); }, {x, g, o}, seed)
                  .max_error <= 1e-4);
        CHECK(grad_check([&] { return weighted_sum(normalize(x, NormKind::layer, g, o), seed); }, {x, g, o}, seed)
                  .max_error <= 1e-4);
    }
}
