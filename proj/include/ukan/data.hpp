#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ukan/metrics.hpp"
#include "ukan/tensor.hpp"

namespace ukan {

inline constexpr int kModalities = 4;  // T1, T1Gd, T2, FLAIR
inline constexpr std::array<const char*, 4> kModalityNames{"t1", "t1gd", "t2", "flair"};

struct SampleVolume {
    std::string case_id;
    Extents ext;
    Spacing spacing;
    std::vector<float> image;           // [4, D, H, W]
    std::vector<std::uint8_t> labels;  // [D, H, W], values 0..4

    void validate() const;
    float& at(int modality, std::int64_t voxel) { return image[modality * ext.voxels() + voxel]; }
    float at(int modality, std::int64_t voxel) const { return image[modality * ext.voxels() + voxel]; }
};

// Deterministic in (seed, extents); every extent must be at least 16.
SampleVolume generate_phantom(std::uint64_t seed, const Extents& ext, const std::string& case_id = "");

// Per-sample seed from (global seed, case id, epoch); independent of load order.
std::uint64_t sample_seed(std::uint64_t seed, const std::string& case_id, std::int64_t epoch);

struct AugmentConfig {
    Extents crop{32, 32, 32};
    double flip_probability = 0.5;
    double noise_sigma = 0.01;
    double max_rotation_deg = 10.0;
    double contrast_lo = 0.8, contrast_hi = 1.2;

    void validate(const Extents& volume) const;
};

// Random choices of one augmentation pass, drawn before anything is applied.
struct AugmentDraw {
    std::array<std::int64_t, 3> crop_origin{};
    std::array<bool, 3> flip{};
    std::uint64_t noise_seed = 0;
    double rotation_rad = 0;
    std::array<int, 2> rotation_axes{0, 1};
    std::array<double, 4> contrast{1, 1, 1, 1};
};

// Axis-aligned bounding box of voxels where any modality is nonzero: {lo, hi} inclusive.
std::array<std::array<std::int64_t, 2>, 3> brain_bbox(const SampleVolume& s);

AugmentDraw draw_augment(const SampleVolume& sample, const AugmentConfig& cfg, std::mt19937_64& rng);

// crop -> flip -> noise -> rotate -> contrast, each driven by `draw`.
SampleVolume apply_augment(const SampleVolume& sample, const AugmentConfig& cfg, const AugmentDraw& draw);

SampleVolume augment(const SampleVolume& sample, const AugmentConfig& cfg, std::uint64_t draw_seed);

// Individual steps.
SampleVolume crop_volume(const SampleVolume& s, const Extents& crop, const std::array<std::int64_t, 3>& origin);
void flip_axis(SampleVolume& s, int axis);
void add_noise(SampleVolume& s, double sigma, std::uint64_t seed);
SampleVolume rotate_volume(const SampleVolume& s, double radians, int axis_a, int axis_b);
void adjust_contrast(SampleVolume& s, const std::array<double, 4>& factors);

// Stacks samples into [B, 4, D, H, W] and the flat label vector.
Tensor stack_images(const std::vector<const SampleVolume*>& samples, DType dtype);
std::vector<std::uint8_t> stack_labels(const std::vector<const SampleVolume*>& samples);

}  // namespace ukan
