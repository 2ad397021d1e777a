#include "ukan/data.hpp"

#include <cmath>

namespace ukan {

namespace {

// Mean intensity per class (background brain, NETC, SNFH, ET, RC) and modality.
constexpr double kIntensity[5][4] = {
    {0.60, 0.55, 0.40, 0.35},
    {0.35, 0.30, 0.70, 0.50},
    {0.45, 0.45, 0.85, 0.95},
    {0.50, 1.00, 0.60, 0.70},
    {0.15, 0.15, 0.95, 0.20},
};

struct Ellipsoid {
    std::array<double, 3> c, r;
    bool contains(double z, double y, double x) const {
        const double a = (z - c[0]) / r[0], b = (y - c[1]) / r[1], d = (x - c[2]) / r[2];
        return a * a + b * b + d * d <= 1.0;
    }
    Ellipsoid scaled(double f) const { return {c, {r[0] * f, r[1] * f, r[2] * f}}; }
};

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

void SampleVolume::validate() const {
    const auto v = static_cast<std::size_t>(ext.voxels());
    if (image.size() != kModalities * v || labels.size() != v)
        throw ShapeError("sample " + case_id + ": image/label sizes do not match extents");
    for (auto l : labels)
        if (l > 4) throw Error("sample " + case_id + ": label value " + std::to_string(l) + " outside 0..4");
}

std::uint64_t sample_seed(std::uint64_t seed, const std::string& case_id, std::int64_t epoch) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : case_id) h = (h ^ ch) * 0x100000001b3ULL;
    return splitmix(splitmix(seed ^ splitmix(h)) ^ static_cast<std::uint64_t>(epoch));
}

SampleVolume generate_phantom(std::uint64_t seed, const Extents& ext, const std::string& case_id) {
    if (ext.d < 16 || ext.h < 16 || ext.w < 16) throw Error("phantom extents must be at least 16 per axis");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    const std::array<double, 3> n{double(ext.d), double(ext.h), double(ext.w)};

    Ellipsoid brain;
    for (int a = 0; a < 3; ++a) {
        brain.c[a] = (n[a] - 1) / 2 + uni(-0.03, 0.03) * n[a];
        brain.r[a] = uni(0.40, 0.46) * n[a];
    }
    // Random unit direction: tumor on one side of the centre, cavity on the other.
    std::normal_distribution<double> g(0.0, 1.0);
    std::array<double, 3> dir{g(rng), g(rng), g(rng)};
    const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) + 1e-12;
    for (auto& v : dir) v /= len;
    Ellipsoid snfh, rc;
    for (int a = 0; a < 3; ++a) {
        snfh.c[a] = brain.c[a] + 0.12 * n[a] * dir[a];
        snfh.r[a] = uni(0.22, 0.26) * n[a];
        rc.c[a] = brain.c[a] - 0.24 * n[a] * dir[a];
        rc.r[a] = uni(0.12, 0.14) * n[a];
    }
    const Ellipsoid et = snfh.scaled(uni(0.62, 0.68));
    const Ellipsoid netc = et.scaled(uni(0.58, 0.64));
    std::array<double, 3> bias_phase{uni(0, 6.283), uni(0, 6.283), uni(0, 6.283)};
    const std::uint64_t texture_seed = rng();

    SampleVolume s;
    s.case_id = case_id;
    s.ext = ext;
    const std::int64_t V = ext.voxels();
    s.image.assign(kModalities * V, 0.0f);
    s.labels.assign(V, 0);
    std::mt19937_64 tex(texture_seed);
    std::normal_distribution<double> texture(0.0, 0.02);
    for (std::int64_t z = 0; z < ext.d; ++z)
        for (std::int64_t y = 0; y < ext.h; ++y)
            for (std::int64_t x = 0; x < ext.w; ++x) {
                const std::int64_t v = (z * ext.h + y) * ext.w + x;
                if (!brain.contains(z, y, x)) continue;
                int cls = 0;
                if (netc.contains(z, y, x)) cls = 1;
                else if (et.contains(z, y, x)) cls = 3;
                else if (snfh.contains(z, y, x)) cls = 2;
                else if (rc.contains(z, y, x)) cls = 4;
                s.labels[v] = static_cast<std::uint8_t>(cls);
                const double bias = 1.0 + 0.05 * std::sin(2 * M_PI * z / n[0] + bias_phase[0]) *
                                              std::cos(2 * M_PI * y / n[1] + bias_phase[1]) *
                                              std::sin(M_PI * x / n[2] + bias_phase[2]);
                for (int m = 0; m < kModalities; ++m) {
                    double val = kIntensity[cls][m];
                    if (m == 0) val += 0.1 * (z / (n[0] - 1) - 0.5);
                    val = val * bias + texture(tex);
                    s.image[m * V + v] = static_cast<float>(std::max(val, 0.01));
                }
            }
    return s;
}

Tensor stack_images(const std::vector<const SampleVolume*>& samples, DType dtype) {
    if (samples.empty()) throw Error("stack_images: empty batch");
    const Extents e = samples[0]->ext;
    std::vector<double> v;
    v.reserve(samples.size() * kModalities * e.voxels());
    for (const auto* s : samples) {
        if (s->ext.d != e.d || s->ext.h != e.h || s->ext.w != e.w)
            throw ShapeError("stack_images: case " + s->case_id + " has different extents");
        v.insert(v.end(), s->image.begin(), s->image.end());
    }
    return Tensor::from_vector({static_cast<std::int64_t>(samples.size()), kModalities, e.d, e.h, e.w}, v, dtype);
}

std::vector<std::uint8_t> stack_labels(const std::vector<const SampleVolume*>& samples) {
    std::vector<std::uint8_t> out;
    for (const auto* s : samples) out.insert(out.end(), s->labels.begin(), s->labels.end());
    return out;
}

}  // namespace ukan
