#pragma once

#include <array>
#include <optional>
#include <string>

#include "ukan/attention.hpp"
#include "ukan/tensor.hpp"

namespace ukan {

enum class PfaMode { eca_after_pfa, eca_before_pfa, no_eca, esa_after_pfa, eca_and_esa, self_attention };

const char* pfa_mode_name(PfaMode mode);
PfaMode parse_pfa_mode(const std::string& name);

// Encoder features X(1) (shallowest) .. X(3) (deepest).
struct PyramidFeatures {
    std::array<Tensor, 3> levels;

    // Throws ShapeError unless batch sizes agree and every level is exactly
    // twice the spatial size of the next deeper one.
    void validate() const;
};

// Attention modules for the two fused levels; index 0 is level 1.
struct PfaAttention {
    std::array<std::optional<EcaModule>, 2> eca;
    std::array<std::optional<EsaModule>, 2> esa;
    std::array<std::optional<SpatialSelfAttention>, 2> self_attention;
};

struct PfaOutput {
    std::array<Tensor, 2> aggregated;  // X-check(1), X-check(2)
    std::array<Tensor, 2> skips;       // X-tilde(1), X-tilde(2)
};

// Skip widths produced by fusion: {C1 + C2 + C3, C2 + C3}.
std::array<std::int64_t, 2> pfa_skip_channels(const std::array<std::int64_t, 3>& encoder_channels);

// Top-down fusion: for l = 2 then 1,
//   X-check(l) = Concat(Upsample(X-tilde(l+1)), X(l)),  X-tilde(3) = X(3),
// followed by the recalibration selected by `mode`. Upsampled deep channels
// come first in the concatenation.
PfaOutput pfa_fuse(const PyramidFeatures& feats, const PfaAttention& modules, PfaMode mode);

}  // namespace ukan
