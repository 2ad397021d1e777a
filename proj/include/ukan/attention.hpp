#pragma once

#include <optional>

#include "ukan/params.hpp"
#include "ukan/tensor.hpp"

namespace ukan {

// Adaptive ECA kernel: t = floor(|(log2(C) + 1) / 2|), bumped to the next odd
// number when even, never below 3.
int eca_kernel_size(std::int64_t channels);

struct EcaModule {
    Tensor weight;  // [1, 1, k]
    int kernel_size() const { return static_cast<int>(weight.dim(2)); }
};

EcaModule make_eca(ParameterStore& store, Initializer& init, const std::string& prefix, int kernel_size);

// Per-channel weights a = sigmoid(conv1d(GAP(X))), shape [B, C].
Tensor eca_weights(const Tensor& x, const EcaModule& m);
// X~_c = a_c * X_c
Tensor eca_forward(const Tensor& x, const EcaModule& m);

struct EsaModule {
    Tensor weight;  // [1, 1, k, k, k]
    int kernel_size() const { return static_cast<int>(weight.dim(2)); }
};

EsaModule make_esa(ParameterStore& store, Initializer& init, const std::string& prefix,
                   int kernel_size = 7);

// Per-voxel weights w = sigmoid(conv3d(mean_c X)), shape [B, 1, D, H, W].
Tensor esa_weights(const Tensor& x, const EsaModule& m);
Tensor esa_forward(const Tensor& x, const EsaModule& m);

// Multi-head scaled dot-product self-attention on tokens with residual.
// Projections act on the right: q = x * Wq, all weights [E, E], no bias.
struct SelfAttentionBlock {
    int heads = 1;
    Tensor wq, wk, wv, wo;
    std::int64_t embed_dim() const { return wq.dim(0); }
};

SelfAttentionBlock make_self_attention(ParameterStore& store, Initializer& init, const std::string& prefix,
                                       std::int64_t embed_dim, int heads);

// tokens [B, T, E] -> [B, T, E]. When `attention` is given it receives the
// softmax weights [B * heads, T, T].
Tensor self_attention_forward(const Tensor& tokens, const SelfAttentionBlock& block,
                              Tensor* attention = nullptr);

// Self-attention applied to a feature map through the Tok-KAN token grid:
// stride-2 patch conv -> attention -> trilinear x2 -> 1x1x1 projection,
// added back to the input.
struct SpatialSelfAttention {
    Tensor patch_weight, patch_bias;  // [C, C, 3, 3, 3], [C]
    SelfAttentionBlock attn;
    Tensor proj_weight, proj_bias;  // [C, C, 1, 1, 1], [C]
};

// Head count used for feature maps of `channels` channels.
int default_heads(std::int64_t channels);

SpatialSelfAttention make_spatial_self_attention(ParameterStore& store, Initializer& init,
                                                 const std::string& prefix, std::int64_t channels);

Tensor spatial_self_attention_forward(const Tensor& x, const SpatialSelfAttention& m);

}  // namespace ukan
