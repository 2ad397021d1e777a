#include "ukan/attention.hpp"

#include <cmath>

#include "ukan/kan.hpp"
#include "ukan/nn.hpp"
#include "ukan/ops.hpp"

namespace ukan {

int eca_kernel_size(std::int64_t channels) {
    if (channels < 1) throw Error("eca_kernel_size: channel count must be positive");
    const double t = std::fabs((std::log2(static_cast<double>(channels)) + 1.0) / 2.0);
    int k = static_cast<int>(t);
    if (k % 2 == 0) k += 1;
    return std::max(k, 3);
}

EcaModule make_eca(ParameterStore& store, Initializer& init, const std::string& prefix, int kernel_size) {
    if (kernel_size < 3 || kernel_size % 2 == 0) throw Error("ECA kernel size must be odd and >= 3");
    return {store.add(prefix + ".weight", init.kaiming_uniform({1, 1, kernel_size}, kernel_size, 1.0))};
}

namespace {

Shape channel_broadcast_shape(const Tensor& x) {
    Shape s{x.dim(0), x.dim(1)};
    for (int a = 2; a < x.rank(); ++a) s.push_back(1);
    return s;
}

}  // namespace

Tensor eca_weights(const Tensor& x, const EcaModule& m) {
    const std::int64_t B = x.dim(0), C = x.dim(1);
    Tensor z = reshape(global_avg_pool(x), {B, 1, C});
    const int k = m.kernel_size();
    Tensor a = sigmoid(convolve(z, m.weight, std::nullopt, ConvSpec::conv1d((k - 1) / 2)));
    return reshape(a, {B, C});
}

Tensor eca_forward(const Tensor& x, const EcaModule& m) {
    return mul(x, reshape(eca_weights(x, m), channel_broadcast_shape(x)));
}

EsaModule make_esa(ParameterStore& store, Initializer& init, const std::string& prefix, int kernel_size) {
    if (kernel_size < 1 || kernel_size % 2 == 0) throw Error("ESA kernel size must be odd");
    const std::int64_t k = kernel_size;
    return {store.add(prefix + ".weight", init.kaiming_uniform({1, 1, k, k, k}, k * k * k, 1.0))};
}

Tensor esa_weights(const Tensor& x, const EsaModule& m) {
    if (x.rank() != 5) throw ShapeError("esa expects [B,C,D,H,W]");
    Tensor s = reduce(x, ReduceKind::mean, {1}, true);
    return sigmoid(convolve(s, m.weight, std::nullopt, ConvSpec::same3d(m.kernel_size())));
}

Tensor esa_forward(const Tensor& x, const EsaModule& m) { return mul(x, esa_weights(x, m)); }

SelfAttentionBlock make_self_attention(ParameterStore& store, Initializer& init, const std::string& prefix,
                                       std::int64_t embed_dim, int heads) {
    if (heads < 1 || embed_dim % heads != 0)
        throw ShapeError("self-attention: embedding dim " + std::to_string(embed_dim) +
                         " not divisible by " + std::to_string(heads) + " heads");
    SelfAttentionBlock b;
    b.heads = heads;
    b.wq = store.add(prefix + ".wq", init.kaiming_uniform({embed_dim, embed_dim}, embed_dim, 1.0));
    b.wk = store.add(prefix + ".wk", init.kaiming_uniform({embed_dim, embed_dim}, embed_dim, 1.0));
    b.wv = store.add(prefix + ".wv", init.kaiming_uniform({embed_dim, embed_dim}, embed_dim, 1.0));
    b.wo = store.add(prefix + ".wo", init.kaiming_uniform({embed_dim, embed_dim}, embed_dim, 1.0));
    return b;
}

Tensor self_attention_forward(const Tensor& tokens, const SelfAttentionBlock& block, Tensor* attention) {
    if (tokens.rank() != 3) throw ShapeError("self-attention expects [B, T, E]");
    const std::int64_t B = tokens.dim(0), T = tokens.dim(1), E = tokens.dim(2);
    const std::int64_t h = block.heads;
    if (E != block.embed_dim()) throw ShapeError("self-attention: embedding dim mismatch");
    if (E % h != 0) throw ShapeError("self-attention: embedding dim not divisible by heads");
    const std::int64_t dh = E / h;

    Tensor flat = reshape(tokens, {B * T, E});
    auto split_heads = [&](const Tensor& w) {
        Tensor p = reshape(matmul(flat, w), {B, T, h, dh});
        return reshape(permute(p, {0, 2, 1, 3}), {B * h, T, dh});
    };
    Tensor q = split_heads(block.wq), k = split_heads(block.wk), v = split_heads(block.wv);
    Tensor scores = scale(matmul(q, permute(k, {0, 2, 1})), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor weights = softmax(scores, 2);
    if (attention) *attention = weights.detach();
    Tensor ctx = permute(reshape(matmul(weights, v), {B, h, T, dh}), {0, 2, 1, 3});
    Tensor out = matmul(reshape(ctx, {B * T, E}), block.wo);
    return add(tokens, reshape(out, {B, T, E}));
}

int default_heads(std::int64_t channels) {
    for (int h : {4, 2})
        if (channels % h == 0) return h;
    return 1;
}

SpatialSelfAttention make_spatial_self_attention(ParameterStore& store, Initializer& init,
                                                 const std::string& prefix, std::int64_t channels) {
    SpatialSelfAttention m;
    const std::int64_t C = channels;
    m.patch_weight = store.add(prefix + ".patch.weight", init.kaiming_uniform({C, C, 3, 3, 3}, C * 27, 1.0));
    m.patch_bias = store.add(prefix + ".patch.bias", init.zeros({C}));
    m.attn = make_self_attention(store, init, prefix + ".attn", C, default_heads(C));
    m.proj_weight = store.add(prefix + ".proj.weight", init.kaiming_uniform({C, C, 1, 1, 1}, C, 1.0));
    m.proj_bias = store.add(prefix + ".proj.bias", init.zeros({C}));
    return m;
}

Tensor spatial_self_attention_forward(const Tensor& x, const SpatialSelfAttention& m) {
    if (x.rank() != 5) throw ShapeError("spatial self-attention expects [B,C,D,H,W]");
    for (int a = 2; a < 5; ++a)
        if (x.dim(a) % 2 != 0) throw ShapeError("spatial self-attention needs even extents");
    Tensor feat = convolve(x, m.patch_weight, m.patch_bias, ConvSpec::same3d(3, 2));
    const std::int64_t d = feat.dim(2), h = feat.dim(3), w = feat.dim(4);
    Tensor attended = tokens_to_grid(self_attention_forward(grid_to_tokens(feat), m.attn), d, h, w);
    Tensor back = convolve(trilinear_upsample(attended, 2), m.proj_weight, m.proj_bias, ConvSpec{});
    return add(x, back);
}

}  // namespace ukan
