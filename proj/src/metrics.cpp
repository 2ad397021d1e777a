#include "ukan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ukan/kv.hpp"
#include "ukan/tensor.hpp"

namespace ukan {

namespace {

void check_same(const Mask& a, const Mask& b, const char* op) {
    if (a.size() != b.size())
        throw ShapeError(std::string(op) + ": mask sizes differ (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
}

void check_extents(const Mask& m, const Extents& ext, const char* op) {
    if (static_cast<std::int64_t>(m.size()) != ext.voxels())
        throw ShapeError(std::string(op) + ": mask of " + std::to_string(m.size()) + " voxels does not match grid");
}

// Lower envelope of parabolas (Felzenszwalb-Huttenlocher), in place on
// `f` sampled at n points spaced `s` apart.
void edt_1d(double* f, std::int64_t n, std::int64_t stride, double s, std::vector<double>& buf,
            std::vector<std::int64_t>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    buf.resize(n);
    v.resize(n);
    z.resize(n + 1);
    for (std::int64_t i = 0; i < n; ++i) buf[i] = f[i * stride];
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
        if (buf[q] == inf) continue;
        const double pq = q * s;
        while (k >= 0) {
            const double pv = v[k] * s;
            const double x = ((buf[q] + pq * pq) - (buf[v[k]] + pv * pv)) / (2 * (pq - pv));
            if (x <= z[k]) --k;
            else {
                ++k;
                v[k] = q;
                z[k] = x;
                z[k + 1] = inf;
                break;
            }
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
        }
    }
    if (k < 0) return;  // no sites on this line
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (z[j + 1] < q * s) ++j;
        const double d = (q - v[j]) * s;
        f[q * stride] = d * d + buf[v[j]];
    }
}

}  // namespace

OverlapCounts overlap_counts(const Mask& pred, const Mask& truth) {
    check_same(pred, truth, "overlap_counts");
    OverlapCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, g = truth[i] != 0;
        c.predicted += p;
        c.truth += g;
        c.intersection += p && g;
    }
    return c;
}

DiceIou dice_iou(const Mask& pred, const Mask& truth) {
    const OverlapCounts c = overlap_counts(pred, truth);
    DiceIou r;
    if (c.predicted + c.truth == 0) return r;
    r.dice = 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.predicted + c.truth);
    r.iou = static_cast<double>(c.intersection) / static_cast<double>(c.union_size());
    return r;
}

Mask boundary(const Mask& mask, const Extents& ext) {
    check_extents(mask, ext, "boundary");
    Mask out(mask.size(), 0);
    const std::int64_t D = ext.d, H = ext.h, W = ext.w;
    auto inside = [&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return z >= 0 && z < D && y >= 0 && y < H && x >= 0 && x < W && mask[(z * H + y) * W + x];
    };
    for (std::int64_t z = 0; z < D; ++z)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) {
                if (!mask[(z * H + y) * W + x]) continue;
                out[(z * H + y) * W + x] = !(inside(z - 1, y, x) && inside(z + 1, y, x) && inside(z, y - 1, x) &&
                                             inside(z, y + 1, x) && inside(z, y, x - 1) && inside(z, y, x + 1));
            }
    return out;
}

std::vector<double> squared_distance_transform(const Mask& sites, const Extents& ext, const Spacing& sp) {
    check_extents(sites, ext, "distance transform");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> f(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) f[i] = sites[i] ? 0.0 : inf;
    std::vector<double> buf, z;
    std::vector<std::int64_t> v;
    const std::int64_t D = ext.d, H = ext.h, W = ext.w;
    for (std::int64_t a = 0; a < D * H; ++a) edt_1d(f.data() + a * W, W, 1, sp.w, buf, v, z);
    for (std::int64_t d = 0; d < D; ++d)
        for (std::int64_t x = 0; x < W; ++x) edt_1d(f.data() + d * H * W + x, H, W, sp.h, buf, v, z);
    for (std::int64_t a = 0; a < H * W; ++a) edt_1d(f.data() + a, D, H * W, sp.d, buf, v, z);
    return f;
}

double grid_diagonal(const Extents& ext, const Spacing& sp) {
    const double a = ext.d * sp.d, b = ext.h * sp.h, c = ext.w * sp.w;
    return std::sqrt(a * a + b * b + c * c);
}

double nearest_rank(std::vector<double> values, double q) {
    if (values.empty()) throw Error("nearest_rank of an empty set");
    auto rank = static_cast<std::int64_t>(std::ceil(q * static_cast<double>(values.size())));
    rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(values.size()));
    std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
    return values[rank - 1];
}

double hd95(const Mask& pred, const Mask& truth, const Extents& ext, const Spacing& sp) {
    check_same(pred, truth, "hd95");
    check_extents(pred, ext, "hd95");
    const bool pe = std::none_of(pred.begin(), pred.end(), [](auto v) { return v != 0; });
    const bool ge = std::none_of(truth.begin(), truth.end(), [](auto v) { return v != 0; });
    if (pe && ge) return 0.0;
    if (pe || ge) return grid_diagonal(ext, sp);
    const Mask bp = boundary(pred, ext), bg = boundary(truth, ext);
    const auto dp = squared_distance_transform(bp, ext, sp);
    const auto dg = squared_distance_transform(bg, ext, sp);
    std::vector<double> pooled;
    for (std::size_t i = 0; i < bp.size(); ++i) {
        if (bp[i]) pooled.push_back(std::sqrt(dg[i]));
        if (bg[i]) pooled.push_back(std::sqrt(dp[i]));
    }
    return nearest_rank(std::move(pooled), 0.95);
}

const char* region_name(Region r) {
    switch (r) {
        case Region::netc: return "NETC";
        case Region::snfh: return "SNFH";
        case Region::et: return "ET";
        case Region::rc: return "RC";
        case Region::wt: return "WT";
    }
    return "?";
}

std::array<Mask, 5> compose_regions(const std::vector<std::uint8_t>& labels) {
    std::array<Mask, 5> m;
    for (auto& x : m) x.assign(labels.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        if (l > 4) throw Error("label value " + std::to_string(l) + " outside 0..4 at voxel " + std::to_string(i));
        if (l == 0) continue;
        m[l - 1][i] = 1;
        if (l <= 3) m[4][i] = 1;
    }
    return m;
}

CaseMetrics case_metrics(const std::string& case_id, const std::vector<std::uint8_t>& predicted,
                         const std::vector<std::uint8_t>& truth, const Extents& ext, const Spacing& sp) {
    if (predicted.size() != truth.size()) throw ShapeError("case " + case_id + ": prediction and truth sizes differ");
    const auto p = compose_regions(predicted);
    const auto g = compose_regions(truth);
    CaseMetrics c;
    c.case_id = case_id;
    for (int r = 0; r < 5; ++r) {
        const DiceIou o = dice_iou(p[r], g[r]);
        c.regions[r] = {o.dice, o.iou, hd95(p[r], g[r], ext, sp)};
    }
    return c;
}

MeanCi mean_ci95(const std::vector<double>& values) {
    const auto n = values.size();
    if (n < 2) throw Error("summary statistics need at least 2 cases, got " + std::to_string(n));
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return {mean, 1.96 * sd / std::sqrt(static_cast<double>(n))};
}

MetricsReport summarize(const std::vector<CaseMetrics>& cases) {
    MetricsReport r;
    r.cases = cases;
    for (int k = 0; k < 5; ++k) {
        std::vector<double> d, i, h;
        for (const auto& c : cases) {
            d.push_back(c.regions[k].dice);
            i.push_back(c.regions[k].iou);
            h.push_back(c.regions[k].hd95);
        }
        r.dice[k] = mean_ci95(d);
        r.iou[k] = mean_ci95(i);
        r.hd95[k] = mean_ci95(h);
    }
    return r;
}

std::string report_csv(const MetricsReport& report) {
    std::string out = "case_id,region,dice,iou,hd95\n";
    for (const auto& c : report.cases)
        for (int k = 0; k < 5; ++k)
            out += c.case_id + "," + region_name(kRegions[k]) + "," + format_double(c.regions[k].dice) + "," +
                   format_double(c.regions[k].iou) + "," + format_double(c.regions[k].hd95) + "\n";
    for (int k = 0; k < 5; ++k)
        out += std::string("mean,") + region_name(kRegions[k]) + "," + format_double(report.dice[k].mean) + "," +
               format_double(report.iou[k].mean) + "," + format_double(report.hd95[k].mean) + "\n";
    for (int k = 0; k < 5; ++k)
        out += std::string("ci95,") + region_name(kRegions[k]) + "," + format_double(report.dice[k].ci95) + "," +
               format_double(report.iou[k].ci95) + "," + format_double(report.hd95[k].ci95) + "\n";
    return out;
}

std::string report_table_csv(const MetricsReport& report, const std::string& model) {
    std::string out = "model,statistic";
    for (const char* metric : {"dice", "iou", "hd95"})
        for (Region r : kRegions) out += std::string(",") + metric + "_" + region_name(r);
    out += "\n";
    for (int stat = 0; stat < 2; ++stat) {
        out += model + (stat == 0 ? ",mean" : ",ci95");
        for (const auto* col : {&report.dice, &report.iou, &report.hd95})
            for (const auto& mc : *col) out += "," + format_double(stat == 0 ? mc.mean : mc.ci95);
        out += "\n";
    }
    return out;
}

}  // namespace ukan
