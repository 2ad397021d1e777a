#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "ukan/ops.hpp"

using namespace ukan;
using ukan::testing::grad_check;
using ukan::testing::leaf;
using ukan::testing::random_tensor;
using ukan::testing::weighted_sum;

namespace {

Tensor d(Shape s, std::vector<double> v) { return Tensor::from_doubles(std::move(s), std::move(v)); }

// Explicit tiling of `t` to `target` (both rank-equal), used as broadcast oracle.
Tensor tile_to(const Tensor& t, const Shape& target) {
    std::vector<double> out(shape_numel(target));
    const auto src = t.to_vector();
    const int r = static_cast<int>(target.size());
    std::vector<std::int64_t> idx(r, 0);
    for (std::size_t o = 0; o < out.size(); ++o) {
        std::int64_t rem = static_cast<std::int64_t>(o), flat = 0;
        for (int a = r - 1; a >= 0; --a) {
            idx[a] = rem % target[a];
            rem /= target[a];
        }
        for (int a = 0; a < r; ++a) flat = flat * t.shape()[a] + (t.shape()[a] == 1 ? 0 : idx[a]);
        out[o] = src[flat];
    }
    return Tensor::from_doubles(target, out);
}

}  // namespace

TEST_CASE("binary ops: examples and broadcast shapes") {
    CHECK(add(d({3}, {1, 2, 3}), d({3}, {0, 0, 0})).to_vector() == std::vector<double>{1, 2, 3});
    CHECK(mul(Tensor::zeros({2, 1, 3}, DType::f64), Tensor::zeros({1, 4, 1}, DType::f64)).shape() == Shape{2, 4, 3});
    CHECK_THROWS_AS(add(Tensor::zeros({2, 3}, DType::f64), Tensor::zeros({3, 2}, DType::f64)), ShapeError);
    const Tensor z = div(d({2}, {1, -1}), d({2}, {0, 0})).clone();
    CHECK(std::isinf(z.at(0)));
}

TEST_CASE("sub(x, x) is zero with zero gradient") {
    Tensor x = leaf(random_tensor({4}, 3));
    Tape tape;
    GradScope s(tape);
    const Tensor y = sub(x, x);
    for (double v : y.to_vector()) CHECK(v == 0.0);
    const auto g = tape.backward(sum_all(y));
    for (double v : g.at(x).to_vector()) CHECK(v == 0.0);
}

TEST_CASE("broadcast equals explicit tiling bit-exactly for add and mul") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor a = random_tensor({2, 1, 3, 1}, seed);
        const Tensor b = random_tensor({1, 4, 1, 5}, seed + 100);
        const Shape target{2, 4, 3, 5};
        CHECK(add(a, b).to_vector() == add(tile_to(a, target), tile_to(b, target)).to_vector());
        CHECK(mul(a, b).to_vector() == mul(tile_to(a, target), tile_to(b, target)).to_vector());
    }
}

TEST_CASE("mixed dtypes are rejected") {
    CHECK_THROWS_AS(add(Tensor::zeros({2}, DType::f32), Tensor::zeros({2}, DType::f64)), DTypeError);
}

TEST_CASE("matmul: identity, hand arithmetic, inner mismatch") {
    const Tensor a = random_tensor({3, 3}, 1);
    const Tensor eye = d({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(matmul(a, eye).to_vector() == a.to_vector());
    CHECK(matmul(d({2, 2}, {1, 2, 3, 4}), d({2, 1}, {1, 1})).to_vector() == std::vector<double>{3, 7});
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}, DType::f64), Tensor::zeros({2, 3}, DType::f64)), ShapeError);
}

TEST_CASE("matmul gradient of sum(a b) is the row-broadcast of column sums") {
    Tensor a = leaf(random_tensor({3, 4}, 7));
    Tensor b = leaf(random_tensor({4, 5}, 8));
    Tape tape;
    GradScope s(tape);
    const auto g = tape.backward(sum_all(matmul(a, b)));
    const auto bv = b.to_vector();
    const auto ga = g.at(a).to_vector();
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 4; ++k) {
            double row = 0;
            for (int j = 0; j < 5; ++j) row += bv[k * 5 + j];
            CHECK(ga[i * 4 + k] == doctest::Approx(row).epsilon(1e-14));
        }
}

TEST_CASE("activations: fixed points and relu subgradient") {
    CHECK(sigmoid(d({1}, {0})).item() == 0.5);
    CHECK(silu(d({1}, {0})).item() == 0.0);
    Tensor x = leaf(d({2}, {-1, 2}));
    Tape tape;
    GradScope s(tape);
    const auto g = tape.backward(sum_all(relu(x)));
    CHECK(g.at(x).to_vector() == std::vector<double>{0, 1});
}

TEST_CASE("relu gradient at zero is zero") {
    Tensor x = leaf(d({1}, {0}));
    Tape tape;
    GradScope s(tape);
    CHECK(tape.backward(sum_all(relu(x))).at(x).item() == 0.0);
}

TEST_CASE("softmax: symmetry, stability, shift invariance, axis check") {
    for (double v : softmax(d({3}, {0, 0, 0}), 0).to_vector()) CHECK(v == doctest::Approx(1.0 / 3));
    const auto big = softmax(d({2}, {1000, 0}), 0).to_vector();
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] >= 0.0);
    CHECK(std::isfinite(big[1]));
    const Tensor x = random_tensor({4, 6}, 5);
    const auto a = softmax(x, 1).to_vector();
    const auto b = softmax(add_scalar(x, 3.25), 1).to_vector();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    for (int r = 0; r < 4; ++r) {
        double s = 0;
        for (int c = 0; c < 6; ++c) s += a[r * 6 + c];
        CHECK(std::abs(s - 1) <= 1e-6);
    }
    CHECK_THROWS(softmax(x, 2));
}

TEST_CASE("reduce: sums, means, first-argmax routing, axis check") {
    CHECK(sum_all(Tensor::full({2, 3}, 1.0, DType::f64)).item() == 6.0);
    CHECK(mean_all(d({3}, {2, 4, 6})).item() == 4.0);
    Tensor x = leaf(d({4}, {1, 5, 5, 2}));
    Tape tape;
    GradScope s(tape);
    const auto g = tape.backward(reduce(x, ReduceKind::max, {0}));
    CHECK(g.at(x).to_vector() == std::vector<double>{0, 1, 0, 0});
    CHECK_THROWS(reduce(x, ReduceKind::sum, {1}));
}

TEST_CASE("backward: square, fan-out, scalar and tape checks") {
    Tensor x = leaf(d({1}, {3}));
    {
        Tape tape;
        GradScope s(tape);
        CHECK(tape.backward(sum_all(mul(x, x))).at(x).item() == 6.0);
    }
    Tensor y = leaf(random_tensor({5}, 2));
    {
        Tape tape;
        GradScope s(tape);
        const auto g = tape.backward(sum_all(add(y, y)));
        for (double v : g.at(y).to_vector()) CHECK(v == 2.0);
    }
    {
        Tape tape;
        GradScope s(tape);
        CHECK_THROWS_AS(tape.backward(mul(y, y)), AutogradError);
    }
    Tensor detached = sum_all(mul(y, y));  // built with no tape active
    Tape tape;
    CHECK_THROWS_AS(tape.backward(detached), AutogradError);
}

TEST_CASE("tensors that do not require grad never enter the tape") {
    Tensor c = random_tensor({3}, 4);
    Tape tape;
    GradScope s(tape);
    const Tensor y = mul(c, c);
    CHECK_FALSE(y.node().has_value());
}

TEST_CASE("gradient check: elementwise, reductions, softmax, reshaping ops") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Tensor a = leaf(random_tensor({2, 3, 4}, seed, -1, 1));
        Tensor b = leaf(random_tensor({1, 3, 1}, seed + 50, 0.5, 2));
        Tensor p = leaf(random_tensor({2, 3, 4}, seed + 70, 0.2, 2));
        const std::vector<std::function<Tensor()>> fns{
            [&] { return weighted_sum(add(a, b), seed); },
            [&] { return weighted_sum(sub(a, b), seed); },
            [&] { return weighted_sum(mul(a, b), seed); },
            [&] { return weighted_sum(div(a, b), seed); },
            [&] { return weighted_sum(silu(a), seed); },
            [&] { return weighted_sum(sigmoid(a), seed); },
            [&] { return weighted_sum(activation(a, ActivationKind::exp), seed); },
            [&] { return weighted_sum(activation(p, ActivationKind::log), seed); },
            [&] { return weighted_sum(softmax(a, 1), seed); },
            [&] { return weighted_sum(reduce(a, ReduceKind::mean, {0, 2}, true), seed); },
            [&] { return weighted_sum(reduce(a, ReduceKind::max, {2}), seed); },
            [&] { return weighted_sum(permute(a, {2, 0, 1}), seed); },
            [&] { return weighted_sum(concat({a, mul(a, a)}, 1), seed); },
            [&] { return weighted_sum(slice(a, 2, 1, 2), seed); },
            [&] { return weighted_sum(reshape(a, {6, 4}), seed); },
            [&] { return weighted_sum(matmul(reshape(a, {6, 4}), permute(reshape(p, {6, 4}), {1, 0})), seed); },
        };
        for (const auto& f : fns) {
            const auto r = grad_check(f, {a, b, p}, seed);
            CHECK(r.max_error <= 1e-4);
        }
    }
}

TEST_CASE("batched matmul gradient") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Tensor a = leaf(random_tensor({2, 3, 4}, seed));
        Tensor b = leaf(random_tensor({2, 4, 5}, seed + 9));
        CHECK(grad_check([&] { return weighted_sum(matmul(a, b), seed); }, {a, b}, seed).max_error <= 1e-4);
    }
}

TEST_CASE("float32 and float64 forward agree; identical inputs are bit-identical") {
    const Tensor x = random_tensor({3, 5}, 11);
    const auto y64 = softmax(mul(x, x), 1).to_vector();
    const auto y32 = softmax(mul(x.to(DType::f32), x.to(DType::f32)), 1).to_vector();
    for (std::size_t i = 0; i < y64.size(); ++i) CHECK(y32[i] == doctest::Approx(y64[i]).epsilon(1e-6));
    CHECK(softmax(mul(x, x), 1).to_vector() == y64);
}
