#include "ukan/losses.hpp"

#include <cmath>

#include "ukan/ops.hpp"

namespace ukan {

const char* loss_mode_name(LossMode m) { return m == LossMode::dynamic ? "dynamic" : "fixed_half"; }

LossMode parse_loss_mode(const std::string& s) {
    if (s == "dynamic") return LossMode::dynamic;
    if (s == "fixed_half") return LossMode::fixed_half;
    throw Error("unknown loss mode '" + s + "' (expected dynamic or fixed_half)");
}

const char* ce_reduction_name(CeReduction r) { return r == CeReduction::mean ? "mean" : "sum"; }

CeReduction parse_ce_reduction(const std::string& s) {
    if (s == "mean") return CeReduction::mean;
    if (s == "sum") return CeReduction::sum;
    throw Error("unknown CE reduction '" + s + "' (expected mean or sum)");
}

Tensor one_hot(const std::vector<std::uint8_t>& labels, const Shape& spatial, std::int64_t batch,
               std::int64_t classes, DType dtype) {
    const std::int64_t vox = shape_numel(spatial);
    if (static_cast<std::int64_t>(labels.size()) != batch * vox)
        throw ShapeError("one_hot: " + std::to_string(labels.size()) + " labels for batch " + std::to_string(batch) +
                         " of " + shape_str(spatial));
    Shape shape{batch, classes};
    shape.insert(shape.end(), spatial.begin(), spatial.end());
    Tensor out(shape, dtype);
    dispatch(dtype, [&]<class T>(T) {
        auto d = out.mutable_data<T>();
        for (std::int64_t b = 0; b < batch; ++b)
            for (std::int64_t v = 0; v < vox; ++v) {
                const std::int64_t c = labels[b * vox + v];
                if (c >= classes) throw Error("one_hot: label " + std::to_string(c) + " out of range");
                d[(b * classes + c) * vox + v] = T(1);
            }
    });
    return out;
}

namespace {

void check_pair(const Tensor& probs, const Tensor& truth, const char* op) {
    if (probs.shape() != truth.shape())
        throw ShapeError(std::string(op) + ": prediction " + shape_str(probs.shape()) + " vs truth " +
                         shape_str(truth.shape()));
    if (probs.rank() < 3) throw ShapeError(std::string(op) + ": expected [B, C, voxels...]");
}

std::vector<int> non_batch_axes(int rank) {
    std::vector<int> axes;
    for (int a = 1; a < rank; ++a) axes.push_back(a);
    return axes;
}

}  // namespace

Tensor cross_entropy(const Tensor& probs, const Tensor& truth, CeReduction reduction) {
    check_pair(probs, truth, "cross_entropy");
    const Tensor logp = activation(clamp_min(probs, 1e-12), ActivationKind::log);
    const Tensor per = reduce(mul(truth, logp), ReduceKind::sum, non_batch_axes(probs.rank()));
    const std::int64_t vox = probs.numel() / (probs.dim(0) * probs.dim(1));
    return scale(per, reduction == CeReduction::mean ? -1.0 / static_cast<double>(vox) : -1.0);
}

Tensor dice_loss(const Tensor& probs, const Tensor& truth, double eps) {
    check_pair(probs, truth, "dice_loss");
    const std::int64_t fg = probs.dim(1) - 1;
    const Tensor p = slice(probs, 1, 1, fg);
    const Tensor y = slice(truth, 1, 1, fg);
    const auto axes = non_batch_axes(probs.rank());
    const Tensor inter = reduce(mul(p, y), ReduceKind::sum, axes);
    const Tensor denom = add_scalar(add(reduce(p, ReduceKind::sum, axes), reduce(y, ReduceKind::sum, axes)), eps);
    return add_scalar(scale(div(add_scalar(scale(inter, 2.0), eps), denom), -1.0), 1.0);
}

std::pair<double, double> dynamic_weight(double ce, double dice) {
    if (ce < 0 || dice < 0) throw Error("dynamic loss weighting needs non-negative losses");
    const double s = ce + dice;
    const double a = s > 0 ? ce / s : 0.5;
    return {a, (1 - a) * ce + a * dice};
}

LossBreakdown combine_losses(const Tensor& ce, const Tensor& dice, LossMode mode) {
    if (ce.rank() != 1 || ce.shape() != dice.shape()) throw ShapeError("combine_losses expects two [B] tensors");
    LossBreakdown r;
    r.ce = ce.to_vector();
    r.dice = dice.to_vector();
    const std::int64_t n = ce.dim(0);
    std::vector<double> wa(n), wb(n);
    for (std::int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(r.ce[i]) || !std::isfinite(r.dice[i]))
            throw Error("non-finite loss at batch position " + std::to_string(i));
        const double a = mode == LossMode::dynamic ? dynamic_weight(r.ce[i], r.dice[i]).first : 0.5;
        if (r.ce[i] < 0 || r.dice[i] < 0) throw Error("dynamic loss weighting needs non-negative losses");
        r.alpha.push_back(a);
        wa[i] = (1 - a) / static_cast<double>(n);
        wb[i] = a / static_cast<double>(n);
    }
    const Tensor ta = Tensor::from_vector({n}, wa, ce.dtype());
    const Tensor tb = Tensor::from_vector({n}, wb, ce.dtype());
    r.total = sum_all(add(mul(ce, ta), mul(dice, tb)));
    return r;
}

}  // namespace ukan
