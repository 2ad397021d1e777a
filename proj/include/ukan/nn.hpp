#pragma once

#include <array>
#include <optional>

#include "ukan/tensor.hpp"

namespace ukan {

// Convolution geometry. Per-axis arrays are (depth, height, width); a
// spatial_rank of 1 uses only the last entry.
struct ConvSpec {
    int spatial_rank = 3;
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> padding{0, 0, 0};
    int groups = 1;

    static ConvSpec same3d(int kernel, int stride = 1) {
        ConvSpec s;
        s.stride = {stride, stride, stride};
        s.padding = {kernel / 2, kernel / 2, kernel / 2};
        return s;
    }
    ConvSpec with_groups(int g) const {
        ConvSpec s = *this;
        s.groups = g;
        return s;
    }
    static ConvSpec conv1d(int padding) {
        ConvSpec s;
        s.spatial_rank = 1;
        s.padding = {0, 0, padding};
        return s;
    }
};

// Cross-correlation with zero padding.
// input [B, C_in, spatial...], weight [C_out, C_in/groups, k...], bias [C_out].
Tensor convolve(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias,
                const ConvSpec& spec);

Tensor max_pool3d(const Tensor& input);

// Trilinear resampling by an integer factor, half-pixel sample centers
// (align_corners = false) with edge clamping.
Tensor trilinear_upsample(const Tensor& input, int factor = 2);

// [B, C, spatial...] -> [B, C]
Tensor global_avg_pool(const Tensor& input);

enum class NormKind { layer, instance };

// layer: standardize over axis 1 at every (batch, position);
// instance: standardize over the spatial axes of every (batch, channel).
// gain and offset have shape [C] in both modes.
Tensor normalize(const Tensor& input, NormKind kind, const Tensor& gain, const Tensor& offset,
                 double epsilon = 1e-5);

}  // namespace ukan
