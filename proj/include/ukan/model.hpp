#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ukan/attention.hpp"
#include "ukan/kan.hpp"
#include "ukan/kv.hpp"
#include "ukan/params.hpp"
#include "ukan/pfa.hpp"

namespace ukan {

// Plain U-KAN plus every ablation row: PFA on/off, ECA placement, ESA and
// self-attention substitutes.
enum class Variant {
    ukan,
    ukan_ep_eca_after_pfa,
    ukan_ep_eca_before_pfa,
    ukan_pfa,
    ukan_eca_after_conv,
    ukan_eca_after_skip,
    ukan_pfa_esa,
    ukan_esa,
    ukan_pfa_eca_esa,
    ukan_eca_esa,
    ukan_pfa_selfattn,
    ukan_selfattn,
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

enum class EncoderAttention { none, eca, esa, eca_esa, self_attention };

struct VariantLayout {
    std::optional<PfaMode> pfa;  // empty: raw encoder skips
    EncoderAttention encoder = EncoderAttention::none;
    bool eca_on_skips = false;
};

VariantLayout variant_layout(Variant v);

struct ModelConfig {
    Variant variant = Variant::ukan_ep_eca_after_pfa;
    std::int64_t in_channels = 4;
    std::int64_t num_classes = 5;
    std::array<std::int64_t, 3> encoder_channels{8, 16, 32};
    std::array<std::int64_t, 2> token_dims{64, 96};
    int spline_intervals = 5;
    int spline_order = 3;
    bool kan_base_path = true;
    std::uint64_t seed = 0;
    DType dtype = DType::f32;

    void validate() const;
    SplineGrid grid() const;

    // "model.*" keys.
    void write(KeyValues& kv) const;
    static ModelConfig read(const KeyValues& kv);
};

enum class LayerKind {
    conv3d,
    instance_norm,
    relu,
    max_pool,
    upsample,
    concat,
    tok_kan,
    eca,
    esa,
    spatial_self_attention,
};

const char* layer_kind_name(LayerKind k);

// One entry of the ordered layer table. Spatial sizes are expressed as a
// power-of-two divisor of the network input: the layer reads tensors at
// input / 2^in_level.
struct LayerDesc {
    std::string name;
    LayerKind kind;
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int groups = 1;
    bool bias = false;
    int in_level = 0;
    int heads = 1;
    bool kan_base = true;
    std::vector<std::string> params;
};

struct ConvBlock {
    Tensor w1, b1, g1, o1, w2, b2, g2, o2;
};

struct EncoderAttentionModules {
    std::optional<EcaModule> eca;
    std::optional<EsaModule> esa;
    std::optional<SpatialSelfAttention> self_attention;
};

class NetworkGraph {
public:
    const ModelConfig& config() const { return config_; }
    const ParameterStore& parameters() const { return params_; }
    ParameterStore& parameters() { return params_; }
    const std::vector<LayerDesc>& layers() const { return layers_; }

    // Number of modules of a kind in the layer table.
    std::size_t count_layers(LayerKind kind) const;

    Tensor forward(const Tensor& volume) const;

private:
    friend NetworkGraph build_model(const ModelConfig& config);

    ModelConfig config_;
    VariantLayout layout_;
    ParameterStore params_;
    std::vector<LayerDesc> layers_;

    std::array<ConvBlock, 3> encoder_;
    std::array<EncoderAttentionModules, 3> encoder_attention_;
    TokKanBlock tok1_, tok2_, dec_tok1_, dec_tok2_;
    PfaAttention pfa_;
    std::array<std::optional<EcaModule>, 2> skip_eca_;
    ConvBlock dec2_, dec1_;
    Tensor head_weight_, head_bias_;
};

NetworkGraph build_model(const ModelConfig& config);

// volume [B, in_channels, D, H, W] with D, H, W divisible by 16 -> logits
// [B, num_classes, D, H, W].
Tensor model_forward(const NetworkGraph& graph, const Tensor& volume);

std::int64_t count_params(const NetworkGraph& graph);

// Floating-point operation counts. Contractions cost 2 per multiply-add;
// elementwise work is counted per element:
//   normalization 7, sigmoid 4, silu 5, relu 1, add/mul 1, pooling window 7
//   compares, trilinear sample 15, GAP 1 per input element, softmax 5 per
//   score, spline basis 2k + 5k(k+1)/2 per input element.
struct FlopReport {
    std::int64_t total = 0;
    std::vector<std::pair<std::string, std::int64_t>> per_layer;
};

FlopReport count_flops(const NetworkGraph& graph, const Shape& input_shape);

// Per-layer cost of one descriptor at batch `batch` and input extents `input`.
std::int64_t layer_flops(const LayerDesc& layer, std::int64_t batch, const std::array<std::int64_t, 3>& input,
                         const SplineGrid& grid);

}  // namespace ukan
