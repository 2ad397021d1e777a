#include "ukan/data.hpp"

#include <algorithm>
#include <cmath>

namespace ukan {

namespace {

std::int64_t extent(const Extents& e, int axis) { return axis == 0 ? e.d : axis == 1 ? e.h : e.w; }

bool is_brain(const SampleVolume& s, std::int64_t v) {
    for (int m = 0; m < kModalities; ++m)
        if (s.at(m, v) != 0.0f) return true;
    return false;
}

}  // namespace

void AugmentConfig::validate(const Extents& volume) const {
    if (crop.d < 1 || crop.h < 1 || crop.w < 1) throw Error("augment: crop extents must be positive");
    if (crop.d > volume.d || crop.h > volume.h || crop.w > volume.w)
        throw Error("augment: crop larger than the volume");
    if (flip_probability < 0 || flip_probability > 1) throw Error("augment: flip probability outside [0, 1]");
    if (noise_sigma < 0 || max_rotation_deg < 0) throw Error("augment: negative noise sigma or rotation range");
    if (!(contrast_lo > 0 && contrast_lo <= contrast_hi)) throw Error("augment: bad contrast range");
}

std::array<std::array<std::int64_t, 2>, 3> brain_bbox(const SampleVolume& s) {
    std::array<std::array<std::int64_t, 2>, 3> box{{{s.ext.d, -1}, {s.ext.h, -1}, {s.ext.w, -1}}};
    for (std::int64_t z = 0; z < s.ext.d; ++z)
        for (std::int64_t y = 0; y < s.ext.h; ++y)
            for (std::int64_t x = 0; x < s.ext.w; ++x) {
                if (!is_brain(s, (z * s.ext.h + y) * s.ext.w + x)) continue;
                const std::int64_t p[3] = {z, y, x};
                for (int a = 0; a < 3; ++a) {
                    box[a][0] = std::min(box[a][0], p[a]);
                    box[a][1] = std::max(box[a][1], p[a]);
                }
            }
    if (box[0][1] < 0)
        for (int a = 0; a < 3; ++a) box[a] = {0, extent(s.ext, a) - 1};
    return box;
}

AugmentDraw draw_augment(const SampleVolume& sample, const AugmentConfig& cfg, std::mt19937_64& rng) {
    cfg.validate(sample.ext);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AugmentDraw d;
    const auto box = brain_bbox(sample);
    for (int a = 0; a < 3; ++a) {
        const std::int64_t n = extent(sample.ext, a), c = extent(cfg.crop, a);
        std::int64_t lo = std::max<std::int64_t>(0, box[a][1] - c + 1);
        std::int64_t hi = std::min(n - c, box[a][0]);
        if (lo > hi) {  // brain wider than the crop: centre on it
            lo = hi = std::clamp<std::int64_t>((box[a][0] + box[a][1] + 1) / 2 - c / 2, 0, n - c);
        }
        d.crop_origin[a] = std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
    }
    for (int a = 0; a < 3; ++a) d.flip[a] = u(rng) < cfg.flip_probability;
    d.noise_seed = rng();
    const double max_rad = cfg.max_rotation_deg * M_PI / 180.0;
    d.rotation_rad = -max_rad + 2 * max_rad * u(rng);
    static constexpr std::array<std::array<int, 2>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
    d.rotation_axes = pairs[std::uniform_int_distribution<int>(0, 2)(rng)];
    for (auto& f : d.contrast) f = cfg.contrast_lo + (cfg.contrast_hi - cfg.contrast_lo) * u(rng);
    return d;
}

SampleVolume crop_volume(const SampleVolume& s, const Extents& crop, const std::array<std::int64_t, 3>& o) {
    for (int a = 0; a < 3; ++a)
        if (o[a] < 0 || o[a] + extent(crop, a) > extent(s.ext, a)) throw Error("crop window outside the volume");
    SampleVolume out;
    out.case_id = s.case_id;
    out.spacing = s.spacing;
    out.ext = crop;
    const std::int64_t V = crop.voxels(), SV = s.ext.voxels();
    out.image.resize(kModalities * V);
    out.labels.resize(V);
    for (std::int64_t z = 0; z < crop.d; ++z)
        for (std::int64_t y = 0; y < crop.h; ++y)
            for (std::int64_t x = 0; x < crop.w; ++x) {
                const std::int64_t dst = (z * crop.h + y) * crop.w + x;
                const std::int64_t src = ((z + o[0]) * s.ext.h + (y + o[1])) * s.ext.w + (x + o[2]);
                out.labels[dst] = s.labels[src];
                for (int m = 0; m < kModalities; ++m) out.image[m * V + dst] = s.image[m * SV + src];
            }
    return out;
}

void flip_axis(SampleVolume& s, int axis) {
    const std::int64_t D = s.ext.d, H = s.ext.h, W = s.ext.w, V = s.ext.voxels();
    auto idx = [&](std::int64_t z, std::int64_t y, std::int64_t x) { return (z * H + y) * W + x; };
    auto swap_voxels = [&](std::int64_t a, std::int64_t b) {
        std::swap(s.labels[a], s.labels[b]);
        for (int m = 0; m < kModalities; ++m) std::swap(s.image[m * V + a], s.image[m * V + b]);
    };
    for (std::int64_t z = 0; z < D; ++z)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) {
                if (axis == 0 && z < D - 1 - z) swap_voxels(idx(z, y, x), idx(D - 1 - z, y, x));
                if (axis == 1 && y < H - 1 - y) swap_voxels(idx(z, y, x), idx(z, H - 1 - y, x));
                if (axis == 2 && x < W - 1 - x) swap_voxels(idx(z, y, x), idx(z, y, W - 1 - x));
            }
}

void add_noise(SampleVolume& s, double sigma, std::uint64_t seed) {
    if (sigma == 0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    const std::int64_t V = s.ext.voxels();
    for (std::int64_t v = 0; v < V; ++v) {
        if (!is_brain(s, v)) continue;
        for (int m = 0; m < kModalities; ++m) s.image[m * V + v] = static_cast<float>(s.image[m * V + v] + n(rng));
    }
}

SampleVolume rotate_volume(const SampleVolume& s, double radians, int axis_a, int axis_b) {
    if (axis_a == axis_b || axis_a < 0 || axis_b < 0 || axis_a > 2 || axis_b > 2)
        throw Error("rotation needs two distinct axes in 0..2");
    SampleVolume out = s;
    if (radians == 0) return out;
    const std::int64_t n[3] = {s.ext.d, s.ext.h, s.ext.w};
    const std::int64_t V = s.ext.voxels();
    const double c = std::cos(radians), sn = std::sin(radians);
    const double ca = (n[axis_a] - 1) / 2.0, cb = (n[axis_b] - 1) / 2.0;
    auto fetch = [&](int m, const std::int64_t p[3]) -> double {
        for (int a = 0; a < 3; ++a)
            if (p[a] < 0 || p[a] >= n[a]) return 0.0;
        return s.image[m * V + (p[0] * n[1] + p[1]) * n[2] + p[2]];
    };
    for (std::int64_t z = 0; z < n[0]; ++z)
        for (std::int64_t y = 0; y < n[1]; ++y)
            for (std::int64_t x = 0; x < n[2]; ++x) {
                const std::int64_t dst = (z * n[1] + y) * n[2] + x;
                double src[3] = {double(z), double(y), double(x)};
                // inverse map: rotate the output coordinate by -theta
                const double pa = src[axis_a] - ca, pb = src[axis_b] - cb;
                src[axis_a] = c * pa + sn * pb + ca;
                src[axis_b] = -sn * pa + c * pb + cb;

                std::int64_t near[3];
                bool inside = true;
                for (int a = 0; a < 3; ++a) {
                    near[a] = static_cast<std::int64_t>(std::lround(src[a]));
                    inside = inside && near[a] >= 0 && near[a] < n[a];
                }
                out.labels[dst] = inside ? s.labels[(near[0] * n[1] + near[1]) * n[2] + near[2]] : 0;

                std::int64_t base[3];
                double frac[3];
                for (int a = 0; a < 3; ++a) {
                    const double f = std::floor(src[a]);
                    base[a] = static_cast<std::int64_t>(f);
                    frac[a] = src[a] - f;
                }
                for (int m = 0; m < kModalities; ++m) {
                    double acc = 0;
                    for (int corner = 0; corner < 8; ++corner) {
                        std::int64_t p[3];
                        double w = 1;
                        for (int a = 0; a < 3; ++a) {
                            const int bit = (corner >> (2 - a)) & 1;
                            p[a] = base[a] + bit;
                            w *= bit ? frac[a] : 1 - frac[a];
                        }
                        if (w != 0) acc += w * fetch(m, p);
                    }
                    out.image[m * V + dst] = static_cast<float>(acc);
                }
            }
    return out;
}

void adjust_contrast(SampleVolume& s, const std::array<double, 4>& factors) {
    const std::int64_t V = s.ext.voxels();
    std::vector<std::int64_t> brain;
    for (std::int64_t v = 0; v < V; ++v)
        if (is_brain(s, v)) brain.push_back(v);
    if (brain.empty()) return;
    for (int m = 0; m < kModalities; ++m) {
        double mean = 0;
        for (auto v : brain) mean += s.image[m * V + v];
        mean /= static_cast<double>(brain.size());
        for (auto v : brain) s.image[m * V + v] = static_cast<float>(mean + factors[m] * (s.image[m * V + v] - mean));
    }
}

SampleVolume apply_augment(const SampleVolume& sample, const AugmentConfig& cfg, const AugmentDraw& d) {
    SampleVolume s = crop_volume(sample, cfg.crop, d.crop_origin);
    for (int a = 0; a < 3; ++a)
        if (d.flip[a]) flip_axis(s, a);
    add_noise(s, cfg.noise_sigma, d.noise_seed);
    s = rotate_volume(s, d.rotation_rad, d.rotation_axes[0], d.rotation_axes[1]);
    adjust_contrast(s, d.contrast);
    return s;
}

SampleVolume augment(const SampleVolume& sample, const AugmentConfig& cfg, std::uint64_t draw_seed) {
    std::mt19937_64 rng(draw_seed);
    return apply_augment(sample, cfg, draw_augment(sample, cfg, rng));
}

}  // namespace ukan
