#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "gradcheck.hpp"
#include "ukan/losses.hpp"
#include "ukan/ops.hpp"

using namespace ukan;
using ukan::testing::random_labels;
using ukan::testing::grad_check;
using ukan::testing::leaf;
using ukan::testing::random_tensor;

namespace {

Tensor random_probs(std::int64_t B, std::int64_t C, std::int64_t V, std::uint64_t seed) {
    NoGradScope ng;
    return softmax(random_tensor({B, C, V}, seed, -3, 3), 1);
}

}  // namespace

TEST_CASE("one_hot layout and range check") {
    const Tensor t = one_hot({0, 2, 1, 2}, {2}, 2, 3, DType::f64);
    CHECK(t.shape() == Shape{2, 3, 2});
    CHECK(t.to_vector() == std::vector<double>{1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1});
    CHECK_THROWS(one_hot({0, 3}, {2}, 1, 3, DType::f64));
    CHECK_THROWS(one_hot({0, 1, 2}, {2}, 1, 3, DType::f64));
}

TEST_CASE("cross entropy: perfect, uniform, naive-loop oracle, sum mode") {
    const Tensor truth = one_hot({0, 1, 4, 3}, {4}, 1, 5, DType::f64);
    CHECK(cross_entropy(truth, truth).item() <= 1e-12 * 28);
    const Tensor uniform = Tensor::full({1, 5, 4}, 0.2, DType::f64);
    CHECK(cross_entropy(uniform, truth).item() == doctest::Approx(std::log(5.0)).epsilon(1e-15));

    const std::int64_t B = 2, C = 5, V = 37;
    const Tensor p = random_probs(B, C, V, 1);
    const auto labels = random_labels(B * V, C, 2);
    const Tensor y = one_hot(labels, {V}, B, C, DType::f64);
    const auto pv = p.to_vector();
    const auto ce = cross_entropy(p, y).to_vector(), ces = cross_entropy(p, y, CeReduction::sum).to_vector();
    for (int b = 0; b < B; ++b) {
        double s = 0;
        for (int v = 0; v < V; ++v) s -= std::log(std::max(pv[(b * C + labels[b * V + v]) * V + v], 1e-12));
        CHECK(ce[b] == doctest::Approx(s / V).epsilon(1e-10));
        CHECK(ces[b] == doctest::Approx(s).epsilon(1e-10));
    }
    CHECK_THROWS(cross_entropy(p, one_hot(labels, {V}, B, 4, DType::f64)));
}

TEST_CASE("dice loss: perfect, background-only, hand two-voxel case, epsilon bound") {
    const Tensor truth = one_hot({0, 1, 2, 2, 3, 4}, {6}, 1, 5, DType::f64);
    CHECK(dice_loss(truth, truth).item() <= 1e-4);
    CHECK(dice_loss(truth, truth).item() >= 0.0);
    const Tensor bg = one_hot({0, 0, 0, 0, 0, 0}, {6}, 1, 5, DType::f64);
    CHECK(dice_loss(bg, truth).item() == doctest::Approx(1.0).epsilon(1e-5));
    // two voxels, two classes: foreground mass (0.5, 0.5), truth foreground (1, 0)
    const Tensor p = Tensor::from_doubles({1, 2, 2}, {0.5, 0.5, 0.5, 0.5});
    const Tensor y = Tensor::from_doubles({1, 2, 2}, {0, 1, 1, 0});
    CHECK(dice_loss(p, y, 0.0).item() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(dice_loss(p, y).item() == doctest::Approx(1 - (1 + 1e-5) / (2 + 1e-5)).epsilon(1e-15));
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto l = random_labels(64, 5, s);
        l[0] = 1;
        const Tensor t = one_hot(l, {4, 4, 4}, 1, 5, DType::f64);
        CHECK(dice_loss(t, t).item() <= 1e-4);
    }
}

TEST_CASE("dice loss pools foreground classes (scalar-loop oracle)") {
    const std::int64_t B = 3, C = 5, V = 29;
    const Tensor p = random_probs(B, C, V, 5);
    const auto labels = random_labels(B * V, C, 6);
    const auto d = dice_loss(p, one_hot(labels, {V}, B, C, DType::f64)).to_vector();
    const auto pv = p.to_vector();
    for (int b = 0; b < B; ++b) {
        double inter = 0, ps = 0, ts = 0;
        for (int c = 1; c < C; ++c)
            for (int v = 0; v < V; ++v) {
                const double q = pv[(b * C + c) * V + v], t = labels[b * V + v] == c;
                inter += q * t, ps += q, ts += t;
            }
        CHECK(d[b] == doctest::Approx(1 - (2 * inter + 1e-5) / (ps + ts + 1e-5)).epsilon(1e-12));
    }
}

TEST_CASE("dynamic weighting: examples, harmonic mean identity, alpha range") {
    auto [a, t] = dynamic_weight(1.0, 3.0);
    CHECK(a == 0.25);
    CHECK(t == 1.5);
    std::tie(a, t) = dynamic_weight(0.7, 0.7);
    CHECK(a == 0.5);
    CHECK(t == doctest::Approx(0.7).epsilon(1e-15));
    std::tie(a, t) = dynamic_weight(0.0, 0.0);
    CHECK(a == 0.5);
    CHECK(t == 0.0);
    CHECK_THROWS(dynamic_weight(-1.0, 1.0));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(1e-3, 5);
    for (int i = 0; i < 100; ++i) {
        const double ce = u(rng), di = u(rng);
        std::tie(a, t) = dynamic_weight(ce, di);
        CHECK((a > 0 && a < 1));
        CHECK(std::abs(t - 2 * ce * di / (ce + di)) <= 1e-12 * t);
    }
}

TEST_CASE("combine_losses: breakdown, fixed_half, batch mean, validation") {
    const Tensor ce = Tensor::from_doubles({2}, {1.0, 0.4}), di = Tensor::from_doubles({2}, {3.0, 0.4});
    const LossBreakdown d = combine_losses(ce, di);
    CHECK(d.alpha == std::vector<double>{0.25, 0.5});
    CHECK(d.total.item() == doctest::Approx((1.5 + 0.4) / 2).epsilon(1e-15));
    const LossBreakdown f = combine_losses(ce, di, LossMode::fixed_half);
    CHECK(f.alpha == std::vector<double>{0.5, 0.5});
    CHECK(f.total.item() == doctest::Approx((2.0 + 0.4) / 2).epsilon(1e-15));
    CHECK_THROWS(combine_losses(Tensor::from_doubles({1}, {-0.1}), Tensor::from_doubles({1}, {0.2})));
    CHECK_THROWS(combine_losses(Tensor::from_doubles({1}, {NAN}), Tensor::from_doubles({1}, {0.2})));
    CHECK(parse_loss_mode(loss_mode_name(LossMode::fixed_half)) == LossMode::fixed_half);
    CHECK(parse_ce_reduction(ce_reduction_name(CeReduction::sum)) == CeReduction::sum);
}

TEST_CASE("dynamic total gradient equals the frozen-weight gradient") {
    const std::int64_t B = 2, C = 5, V = 40;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Tensor logits = leaf(random_tensor({B, C, V}, seed, -2, 2));
        const Tensor y = one_hot(random_labels(B * V, C, seed + 1), {V}, B, C, DType::f64);
        GradientMap dyn, manual;
        std::vector<double> alpha;
        {
            Tape tape;
            GradScope s(tape);
            const Tensor p = softmax(logits, 1);
            const LossBreakdown lb = combine_losses(cross_entropy(p, y), dice_loss(p, y));
            alpha = lb.alpha;
            dyn = tape.backward(lb.total);
        }
        {
            Tape tape;
            GradScope s(tape);
            const Tensor p = softmax(logits, 1);
            std::vector<double> wa, wb;
            for (double a : alpha) wa.push_back((1 - a) / B), wb.push_back(a / B);
            const Tensor total = sum_all(add(mul(cross_entropy(p, y), Tensor::from_doubles({B}, wa)),
                                             mul(dice_loss(p, y), Tensor::from_doubles({B}, wb))));
            manual = tape.backward(total);
        }
        const auto g1 = dyn.find(logits)->to_vector(), g2 = manual.find(logits)->to_vector();
        for (std::size_t i = 0; i < g1.size(); ++i)
            CHECK(std::abs(g1[i] - g2[i]) <= 1e-10 * std::max(1.0, std::abs(g2[i])));
    }
}

TEST_CASE("gradient check: CE, Dice and both loss modes through softmax") {
    const std::int64_t B = 2, C = 5, V = 27;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Tensor logits = leaf(random_tensor({B, C, V}, seed + 100, -2, 2));
        const Tensor y = one_hot(random_labels(B * V, C, seed), {V}, B, C, DType::f64);
        const auto probs = [&] { return softmax(logits, 1); };
        CHECK(grad_check([&] { return sum_all(cross_entropy(probs(), y)); }, {logits}, seed).max_error <= 1e-4);
        CHECK(grad_check([&] { return sum_all(cross_entropy(probs(), y, CeReduction::sum)); }, {logits}, seed)
                  .max_error <= 1e-4);
        CHECK(grad_check([&] { return sum_all(dice_loss(probs(), y)); }, {logits}, seed).max_error <= 1e-4);
        // Stop-gradient alpha: the frozen-weight objective at the current point
        // is what finite differences of a fixed-weight total measure.
        std::vector<double> alpha;
        {
            NoGradScope ng;
            alpha = combine_losses(cross_entropy(probs(), y), dice_loss(probs(), y)).alpha;
        }
        const auto frozen = [&] {
            std::vector<double> wa, wb;
            for (double a : alpha) wa.push_back((1 - a) / B), wb.push_back(a / B);
            return sum_all(add(mul(cross_entropy(probs(), y), Tensor::from_doubles({B}, wa)),
                               mul(dice_loss(probs(), y), Tensor::from_doubles({B}, wb))));
        };
        GradientMap analytic;
        {
            Tape tape;
            GradScope s(tape);
            analytic = tape.backward(combine_losses(cross_entropy(probs(), y), dice_loss(probs(), y)).total);
        }
        const auto fd_check = grad_check(frozen, {logits}, seed);
        CHECK(fd_check.max_error <= 1e-4);
        GradientMap frozen_grads;
        {
            Tape tape;
            GradScope s(tape);
            frozen_grads = tape.backward(frozen());
        }
        const auto a = analytic.find(logits)->to_vector(), b = frozen_grads.find(logits)->to_vector();
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-10 * std::max(1.0, std::abs(b[i])));
        CHECK(grad_check([&] { return combine_losses(cross_entropy(probs(), y), dice_loss(probs(), y),
                                                     LossMode::fixed_half).total; },
                         {logits}, seed)
                  .max_error <= 1e-4);
    }
}
