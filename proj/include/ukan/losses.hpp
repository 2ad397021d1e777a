#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ukan/tensor.hpp"

namespace ukan {

enum class CeReduction { mean, sum };
enum class LossMode { dynamic, fixed_half };

const char* loss_mode_name(LossMode m);
LossMode parse_loss_mode(const std::string& s);
const char* ce_reduction_name(CeReduction r);
CeReduction parse_ce_reduction(const std::string& s);

// labels [B * V] in 0..classes-1 -> one-hot [B, classes, spatial...].
Tensor one_hot(const std::vector<std::uint8_t>& labels, const Shape& spatial, std::int64_t batch,
               std::int64_t classes, DType dtype);

// Per-sample losses on softmax probabilities [B, C, ...] against one-hot
// truth of the same shape; both return [B].
// CE: -sum_c y log(max(p, 1e-12)), averaged (or summed) over voxels.
Tensor cross_entropy(const Tensor& probs, const Tensor& truth, CeReduction reduction = CeReduction::mean);
// 1 - (2 sum p*y + eps) / (sum p + sum y + eps) pooled over classes 1..C-1.
Tensor dice_loss(const Tensor& probs, const Tensor& truth, double eps = 1e-5);

struct LossBreakdown {
    std::vector<double> ce, dice, alpha;
    Tensor total;  // scalar on the tape
};

// total = mean_i [(1 - a_i) ce_i + a_i dice_i]; a_i = ce_i / (ce_i + dice_i)
// is held constant for differentiation (0.5 when both are zero, always 0.5
// in fixed_half mode).
LossBreakdown combine_losses(const Tensor& ce, const Tensor& dice, LossMode mode = LossMode::dynamic);

// Scalar form of the per-sample weighting: returns {alpha, total}.
std::pair<double, double> dynamic_weight(double ce, double dice);

}  // namespace ukan
