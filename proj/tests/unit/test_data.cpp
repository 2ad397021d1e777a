#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "ukan/data.hpp"

using namespace ukan;

namespace {

double brain_mean(const SampleVolume& s, int m) {
    const std::int64_t V = s.ext.voxels();
    double sum = 0;
    std::int64_t n = 0;
    for (std::int64_t v = 0; v < V; ++v) {
        bool brain = false;
        for (int k = 0; k < kModalities; ++k) brain |= s.image[k * V + v] != 0.0f;
        if (brain) sum += s.image[m * V + v], ++n;
    }
    return sum / n;
}

// Embed a phantom at offset `at` inside a larger zero volume.
SampleVolume padded(const SampleVolume& p, const Extents& ext, std::array<std::int64_t, 3> at) {
    SampleVolume out;
    out.case_id = p.case_id;
    out.ext = ext;
    const std::int64_t V = ext.voxels(), Vp = p.ext.voxels();
    out.image.assign(kModalities * V, 0.0f);
    out.labels.assign(V, 0);
    for (std::int64_t z = 0; z < p.ext.d; ++z)
        for (std::int64_t y = 0; y < p.ext.h; ++y)
            for (std::int64_t x = 0; x < p.ext.w; ++x) {
                const std::int64_t src = (z * p.ext.h + y) * p.ext.w + x;
                const std::int64_t dst = ((z + at[0]) * ext.h + y + at[1]) * ext.w + x + at[2];
                out.labels[dst] = p.labels[src];
                for (int m = 0; m < kModalities; ++m) out.image[m * V + dst] = p.image[m * Vp + src];
            }
    return out;
}

}  // namespace

TEST_CASE("phantom: determinism, label coverage, intensity roles, masking") {
    const Extents e{32, 32, 32};
    const SampleVolume a = generate_phantom(7, e, "x"), b = generate_phantom(7, e, "x");
    CHECK(a.image == b.image);
    CHECK(a.labels == b.labels);
    CHECK(generate_phantom(8, e, "x").image != a.image);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const SampleVolume p = generate_phantom(s, e, "p");
        p.validate();
        std::array<int, 5> counts{};
        for (auto l : p.labels) counts[l]++;
        for (int c = 0; c < 5; ++c) CHECK(counts[c] > 0);
        const std::int64_t V = e.voxels();
        double et = 0, netc = 0, snfh_flair = 0, bg_flair = 0;
        int n_bg = 0;
        for (std::int64_t v = 0; v < V; ++v) {
            const bool brain = p.image[v] != 0.0f;
            if (p.labels[v] == 3) et += p.image[1 * V + v];
            if (p.labels[v] == 1) netc += p.image[1 * V + v];
            if (p.labels[v] == 2) snfh_flair += p.image[3 * V + v];
            if (p.labels[v] == 0 && brain) bg_flair += p.image[3 * V + v], ++n_bg;
            if (!brain) {
                CHECK(p.labels[v] == 0);
                for (int m = 0; m < kModalities; ++m) REQUIRE(p.image[m * V + v] == 0.0f);
            }
        }
        CHECK(et / counts[3] > netc / counts[1]);
        CHECK(snfh_flair / counts[2] > bg_flair / n_bg);
    }
    CHECK_THROWS(generate_phantom(0, {8, 32, 32}, "small"));
}

TEST_CASE("sample_seed depends on seed, case and epoch") {
    const auto s = sample_seed(1, "case001", 3);
    CHECK(s == sample_seed(1, "case001", 3));
    CHECK(s != sample_seed(2, "case001", 3));
    CHECK(s != sample_seed(1, "case002", 3));
    CHECK(s != sample_seed(1, "case001", 4));
}

TEST_CASE("augment with all randomness disabled is the crop alone") {
    const SampleVolume p = generate_phantom(3, {40, 40, 40}, "c");
    AugmentConfig cfg;
    cfg.flip_probability = 0;
    cfg.noise_sigma = 0;
    cfg.max_rotation_deg = 0;
    cfg.contrast_lo = cfg.contrast_hi = 1;
    std::mt19937_64 rng(5);
    const AugmentDraw d = draw_augment(p, cfg, rng);
    const SampleVolume out = apply_augment(p, cfg, d);
    const SampleVolume crop = crop_volume(p, cfg.crop, d.crop_origin);
    CHECK(out.image == crop.image);
    CHECK(out.labels == crop.labels);
    CHECK(out.ext.d == 32);
    // a brain wider than the crop is centred
    const auto bb = brain_bbox(p);
    for (int a = 0; a < 3; ++a) CHECK(d.crop_origin[a] == (bb[a][0] + bb[a][1] + 1 - 32) / 2);
    cfg.crop = {48, 32, 32};
    CHECK_THROWS(cfg.validate(p.ext));
}

TEST_CASE("crop origin keeps a fitting brain and jitters within the slack") {
    const SampleVolume p = padded(generate_phantom(6, {28, 28, 28}, "k"), {48, 48, 48}, {4, 10, 12});
    const auto bb = brain_bbox(p);
    const AugmentConfig cfg;
    std::mt19937_64 rng(3);
    std::array<std::set<std::int64_t>, 3> seen;
    for (int i = 0; i < 500; ++i) {
        const AugmentDraw d = draw_augment(p, cfg, rng);
        for (int a = 0; a < 3; ++a) {
            CHECK(d.crop_origin[a] >= 0);
            CHECK(d.crop_origin[a] + 32 <= 48);
            CHECK(d.crop_origin[a] <= bb[a][0]);
            CHECK(d.crop_origin[a] + 32 > bb[a][1]);
            seen[a].insert(d.crop_origin[a]);
        }
    }
    for (int a = 0; a < 3; ++a) CHECK(seen[a].size() > 1);
}

TEST_CASE("flip is an involution") {
    const SampleVolume p = generate_phantom(4, {16, 16, 32}, "f");
    for (int axis = 0; axis < 3; ++axis) {
        SampleVolume q = p;
        flip_axis(q, axis);
        CHECK(q.labels != p.labels);
        flip_axis(q, axis);
        CHECK(q.image == p.image);
        CHECK(q.labels == p.labels);
    }
}

TEST_CASE("augmentation statistics over 10^4 draws") {
    const SampleVolume p = generate_phantom(9, {32, 32, 32}, "s");
    const AugmentConfig cfg;
    std::mt19937_64 rng(11);
    std::array<int, 3> flips{};
    const int draws = 10000;
    double lo = 2, hi = 0, theta_max = 0;
    std::array<int, 3> pairs{};
    for (int i = 0; i < draws; ++i) {
        const AugmentDraw d = draw_augment(p, cfg, rng);
        for (int a = 0; a < 3; ++a) flips[a] += d.flip[a];
        for (double f : d.contrast) {
            REQUIRE(f >= 0.8);
            REQUIRE(f <= 1.2);
            lo = std::min(lo, f), hi = std::max(hi, f);
        }
        theta_max = std::max(theta_max, std::abs(d.rotation_rad));
        pairs[d.rotation_axes[0] + d.rotation_axes[1] - 1]++;
    }
    for (int a = 0; a < 3; ++a) CHECK(std::abs(flips[a] / double(draws) - 0.5) <= 0.02);
    CHECK(lo < 0.81);
    CHECK(hi > 1.19);
    CHECK(theta_max <= 10 * M_PI / 180);
    for (int c : pairs) CHECK(std::abs(c / double(draws) - 1.0 / 3) <= 0.02);

    // noise: pooled standard deviation of the added values, brain voxels only
    SampleVolume small = generate_phantom(2, {16, 16, 16}, "n");
    const std::int64_t V = small.ext.voxels();
    double s2 = 0, s1 = 0;
    std::int64_t n = 0, outside_changed = 0;
    for (int i = 0; i < draws; ++i) {
        SampleVolume q = small;
        add_noise(q, cfg.noise_sigma, rng());
        for (std::int64_t k = 0; k < kModalities * V; k += 7) {
            const double diff = double(q.image[k]) - double(small.image[k]);
            if (small.image[k % V] == 0.0f) outside_changed += diff != 0.0;
            else s1 += diff, s2 += diff * diff, ++n;
        }
    }
    const double mean = s1 / n, sd = std::sqrt(s2 / n - mean * mean);
    CHECK(std::abs(sd - 0.01) <= 0.0005);
    CHECK(outside_changed == 0);
}

TEST_CASE("contrast preserves brain means and keeps the background at zero") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        SampleVolume p = generate_phantom(s, {24, 24, 24}, "m");
        std::array<double, 4> before{};
        for (int m = 0; m < 4; ++m) before[m] = brain_mean(p, m);
        std::mt19937_64 rng(s);
        std::uniform_real_distribution<double> u(0.8, 1.2);
        adjust_contrast(p, {u(rng), u(rng), u(rng), u(rng)});
        for (int m = 0; m < 4; ++m) CHECK(std::abs(brain_mean(p, m) - before[m]) <= 1e-5 * std::abs(before[m]));
        for (std::size_t v = 0; v < p.labels.size(); ++v)
            if (p.labels[v] == 0 && p.image[v] == 0.0f) CHECK(p.image[3 * p.labels.size() + v] == 0.0f);
    }
}

TEST_CASE("rotation: label alphabet, theta then -theta agreement, zero angle identity") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const SampleVolume p = generate_phantom(s, {32, 32, 32}, "r");
        const double theta = (s % 2 ? -1 : 1) * (4.0 + s) * M_PI / 180;
        const int a = s % 3, b = (s % 3 == 2) ? 0 : a + 1;
        const SampleVolume r = rotate_volume(p, theta, std::min(a, b), std::max(a, b));
        for (auto l : r.labels) REQUIRE(l <= 4);
        const SampleVolume back = rotate_volume(r, -theta, std::min(a, b), std::max(a, b));
        std::int64_t same = 0;
        for (std::size_t v = 0; v < p.labels.size(); ++v) same += back.labels[v] == p.labels[v];
        CHECK(same >= 0.98 * p.labels.size());
        const SampleVolume id = rotate_volume(p, 0.0, 0, 1);
        CHECK(id.labels == p.labels);
        CHECK(id.image == p.image);
    }
}

TEST_CASE("augment: determinism per draw seed, label alphabet, output extents") {
    const SampleVolume p = generate_phantom(12, {40, 36, 36}, "d");
    AugmentConfig cfg;
    const SampleVolume a = augment(p, cfg, 99), b = augment(p, cfg, 99), c = augment(p, cfg, 100);
    CHECK(a.image == b.image);
    CHECK(a.labels == b.labels);
    CHECK(a.image != c.image);
    CHECK(a.ext.d == 32);
    CHECK(a.ext.w == 32);
    for (auto l : a.labels) REQUIRE(l <= 4);
    a.validate();
}

TEST_CASE("stacking samples") {
    const SampleVolume p = generate_phantom(1, {16, 16, 16}, "a"), q = generate_phantom(2, {16, 16, 16}, "b");
    const Tensor t = stack_images({&p, &q}, DType::f32);
    CHECK(t.shape() == Shape{2, 4, 16, 16, 16});
    CHECK(t.at(4 * 4096 + 17) == double(q.image[17]));
    CHECK(stack_labels({&p, &q}).size() == 2 * 4096);
    const SampleVolume r = generate_phantom(3, {16, 16, 32}, "c");
    CHECK_THROWS(stack_images({&p, &r}, DType::f32));
}
