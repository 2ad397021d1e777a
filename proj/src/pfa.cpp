#include "ukan/pfa.hpp"

#include "ukan/nn.hpp"
#include "ukan/ops.hpp"

namespace ukan {

namespace {

constexpr std::array<std::pair<PfaMode, const char*>, 6> kModeNames{{
    {PfaMode::eca_after_pfa, "eca_after_pfa"},
    {PfaMode::eca_before_pfa, "eca_before_pfa"},
    {PfaMode::no_eca, "no_eca"},
    {PfaMode::esa_after_pfa, "esa_after_pfa"},
    {PfaMode::eca_and_esa, "eca_and_esa"},
    {PfaMode::self_attention, "self_attention"},
}};

template <class T>
const T& require(const std::optional<T>& m, const char* what, int level) {
    if (!m) throw Error(std::string("pfa_fuse: missing ") + what + " module for level " + std::to_string(level));
    return *m;
}

}  // namespace

const char* pfa_mode_name(PfaMode mode) {
    for (const auto& [m, n] : kModeNames)
        if (m == mode) return n;
    return "?";
}

PfaMode parse_pfa_mode(const std::string& name) {
    for (const auto& [m, n] : kModeNames)
        if (name == n) return m;
    throw Error("unknown PFA mode '" + name + "'");
}

void PyramidFeatures::validate() const {
    for (const auto& t : levels)
        if (!t.defined() || t.rank() != 5) throw ShapeError("pyramid levels must be [B,C,D,H,W] tensors");
    for (int l = 0; l < 2; ++l) {
        const Tensor& fine = levels[l];
        const Tensor& coarse = levels[l + 1];
        if (fine.dim(0) != coarse.dim(0)) throw ShapeError("pyramid levels disagree on batch size");
        for (int a = 2; a < 5; ++a)
            if (fine.dim(a) != 2 * coarse.dim(a))
                throw ShapeError("pyramid level " + std::to_string(l + 1) + " " + shape_str(fine.shape()) +
                                 " is not twice level " + std::to_string(l + 2) + " " +
                                 shape_str(coarse.shape()));
    }
}

std::array<std::int64_t, 2> pfa_skip_channels(const std::array<std::int64_t, 3>& c) {
    return {c[0] + c[1] + c[2], c[1] + c[2]};
}

PfaOutput pfa_fuse(const PyramidFeatures& feats, const PfaAttention& modules, PfaMode mode) {
    feats.validate();
    PfaOutput out;
    Tensor deeper = feats.levels[2];
    for (int l = 1; l >= 0; --l) {
        const int level = l + 1;
        Tensor encoder = feats.levels[l];
        if (mode == PfaMode::eca_before_pfa) encoder = eca_forward(encoder, require(modules.eca[l], "ECA", level));
        Tensor up = trilinear_upsample(deeper, 2);
        if (up.shape()[2] != encoder.dim(2) || up.shape()[3] != encoder.dim(3) || up.shape()[4] != encoder.dim(4))
            throw ShapeError("pfa_fuse: upsampled level does not match encoder level " + std::to_string(level));
        Tensor fused = concat({up, encoder}, 1);
        out.aggregated[l] = fused;
        switch (mode) {
            case PfaMode::eca_after_pfa:
                fused = eca_forward(fused, require(modules.eca[l], "ECA", level));
                break;
            case PfaMode::eca_before_pfa:
            case PfaMode::no_eca:
                break;
            case PfaMode::esa_after_pfa:
                fused = esa_forward(fused, require(modules.esa[l], "ESA", level));
                break;
            case PfaMode::eca_and_esa:
                fused = esa_forward(eca_forward(fused, require(modules.eca[l], "ECA", level)),
                                    require(modules.esa[l], "ESA", level));
                break;
            case PfaMode::self_attention:
                fused = spatial_self_attention_forward(
                    fused, require(modules.self_attention[l], "self-attention", level));
                break;
        }
        out.skips[l] = fused;
        deeper = fused;
    }
    return out;
}

}  // namespace ukan
