#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ukan {

using Mask = std::vector<std::uint8_t>;

struct Extents {
    std::int64_t d = 0, h = 0, w = 0;
    std::int64_t voxels() const { return d * h * w; }
};

struct Spacing {
    double d = 1.0, h = 1.0, w = 1.0;
};

struct OverlapCounts {
    std::int64_t intersection = 0, predicted = 0, truth = 0;
    std::int64_t union_size() const { return predicted + truth - intersection; }
};

struct DiceIou {
    double dice = 1.0, iou = 1.0;
};

OverlapCounts overlap_counts(const Mask& pred, const Mask& truth);
// Both-empty masks score 1.
DiceIou dice_iou(const Mask& pred, const Mask& truth);

// Mask voxels with at least one 6-neighbour outside the mask or the grid.
Mask boundary(const Mask& mask, const Extents& ext);

// Squared distance (in mm^2) from every voxel to the nearest voxel of `sites`;
// +inf everywhere when `sites` is empty.
std::vector<double> squared_distance_transform(const Mask& sites, const Extents& ext, const Spacing& sp);

// Nearest-rank 95th percentile of the pooled boundary-to-boundary distances.
// Both empty: 0. Exactly one empty: the grid diagonal.
double hd95(const Mask& pred, const Mask& truth, const Extents& ext, const Spacing& sp = {});

double grid_diagonal(const Extents& ext, const Spacing& sp);

// Nearest-rank percentile: element at 1-based rank ceil(q * n) of the sorted values.
double nearest_rank(std::vector<double> values, double q);

enum class Region { netc, snfh, et, rc, wt };
constexpr std::array<Region, 5> kRegions{Region::netc, Region::snfh, Region::et, Region::rc, Region::wt};
const char* region_name(Region r);

// Label classes: 0 background, 1 NETC, 2 SNFH, 3 ET, 4 RC. WT = NETC | SNFH | ET.
std::array<Mask, 5> compose_regions(const std::vector<std::uint8_t>& labels);

struct RegionMetrics {
    double dice = 0, iou = 0, hd95 = 0;
};

struct CaseMetrics {
    std::string case_id;
    std::array<RegionMetrics, 5> regions;
};

CaseMetrics case_metrics(const std::string& case_id, const std::vector<std::uint8_t>& predicted,
                         const std::vector<std::uint8_t>& truth, const Extents& ext, const Spacing& sp = {});

struct MeanCi {
    double mean = 0, ci95 = 0;
};

// mean and 1.96 * s / sqrt(n), s with the n - 1 denominator (two-pass).
MeanCi mean_ci95(const std::vector<double>& values);

struct MetricsReport {
    std::vector<CaseMetrics> cases;
    std::array<MeanCi, 5> dice, iou, hd95;
};

MetricsReport summarize(const std::vector<CaseMetrics>& cases);

// Long form: case_id,region,dice,iou,hd95 with trailing "mean" and "ci95" rows.
std::string report_csv(const MetricsReport& report);
// Wide form matching the published tables: model,statistic then
// dice_*, iou_*, hd95_* over NETC, SNFH, ET, RC, WT.
std::string report_table_csv(const MetricsReport& report, const std::string& model);

}  // namespace ukan
