#include "ukan/model.hpp"

#include <cmath>

#include "ukan/nn.hpp"
#include "ukan/ops.hpp"

namespace ukan {

namespace {

constexpr std::array<std::pair<Variant, const char*>, 12> kVariantNames{{
    {Variant::ukan, "ukan"},
    {Variant::ukan_ep_eca_after_pfa, "ukan_ep_eca_after_pfa"},
    {Variant::ukan_ep_eca_before_pfa, "ukan_ep_eca_before_pfa"},
    {Variant::ukan_pfa, "ukan_pfa"},
    {Variant::ukan_eca_after_conv, "ukan_eca_after_conv"},
    {Variant::ukan_eca_after_skip, "ukan_eca_after_skip"},
    {Variant::ukan_pfa_esa, "ukan_pfa_esa"},
    {Variant::ukan_esa, "ukan_esa"},
    {Variant::ukan_pfa_eca_esa, "ukan_pfa_eca_esa"},
    {Variant::ukan_eca_esa, "ukan_eca_esa"},
    {Variant::ukan_pfa_selfattn, "ukan_pfa_selfattn"},
    {Variant::ukan_selfattn, "ukan_selfattn"},
}};

}  // namespace

const char* variant_name(Variant v) {
    for (const auto& [var, name] : kVariantNames)
        if (var == v) return name;
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (const auto& [var, n] : kVariantNames)
        if (name == n) return var;
    throw Error("unknown model variant '" + name + "'");
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> all = [] {
        std::vector<Variant> v;
        for (const auto& e : kVariantNames) v.push_back(e.first);
        return v;
    }();
    return all;
}

VariantLayout variant_layout(Variant v) {
    VariantLayout l;
    switch (v) {
        case Variant::ukan: break;
        case Variant::ukan_ep_eca_after_pfa: l.pfa = PfaMode::eca_after_pfa; break;
        case Variant::ukan_ep_eca_before_pfa: l.pfa = PfaMode::eca_before_pfa; break;
        case Variant::ukan_pfa: l.pfa = PfaMode::no_eca; break;
        case Variant::ukan_eca_after_conv: l.encoder = EncoderAttention::eca; break;
        case Variant::ukan_eca_after_skip: l.eca_on_skips = true; break;
        case Variant::ukan_pfa_esa: l.pfa = PfaMode::esa_after_pfa; break;
        case Variant::ukan_esa: l.encoder = EncoderAttention::esa; break;
        case Variant::ukan_pfa_eca_esa: l.pfa = PfaMode::eca_and_esa; break;
        case Variant::ukan_eca_esa: l.encoder = EncoderAttention::eca_esa; break;
        case Variant::ukan_pfa_selfattn: l.pfa = PfaMode::self_attention; break;
        case Variant::ukan_selfattn: l.encoder = EncoderAttention::self_attention; break;
    }
    return l;
}

void ModelConfig::validate() const {
    if (in_channels < 1 || num_classes < 2) throw Error("model: need in_channels >= 1 and num_classes >= 2");
    for (auto c : encoder_channels)
        if (c < 1) throw Error("model: encoder channels must be positive");
    if (!(encoder_channels[0] < encoder_channels[1] && encoder_channels[1] < encoder_channels[2]))
        throw Error("model: encoder channels must be strictly increasing");
    for (auto e : token_dims)
        if (e < 1) throw Error("model: token dims must be positive");
    grid().validate();
}

SplineGrid ModelConfig::grid() const {
    SplineGrid g;
    g.intervals = spline_intervals;
    g.order = spline_order;
    return g;
}

void ModelConfig::write(KeyValues& kv) const {
    kv.set("model.variant", variant_name(variant));
    kv.set("model.in_channels", std::to_string(in_channels));
    kv.set("model.num_classes", std::to_string(num_classes));
    kv.set("model.encoder_channels", join_ints({encoder_channels.begin(), encoder_channels.end()}));
    kv.set("model.token_dims", join_ints({token_dims.begin(), token_dims.end()}));
    kv.set("model.spline_intervals", std::to_string(spline_intervals));
    kv.set("model.spline_order", std::to_string(spline_order));
    kv.set("model.kan_base_path", kan_base_path ? "true" : "false");
    kv.set("model.seed", std::to_string(seed));
    kv.set("model.dtype", dtype_name(dtype));
}

ModelConfig ModelConfig::read(const KeyValues& kv) {
    ModelConfig c;
    if (kv.has("model.variant")) c.variant = parse_variant(kv.get("model.variant"));
    if (kv.has("model.in_channels")) c.in_channels = parse_int(kv.get("model.in_channels"), "model.in_channels");
    if (kv.has("model.num_classes")) c.num_classes = parse_int(kv.get("model.num_classes"), "model.num_classes");
    if (kv.has("model.encoder_channels")) {
        auto v = parse_int_list(kv.get("model.encoder_channels"), "model.encoder_channels");
        if (v.size() != 3) throw Error("model.encoder_channels needs exactly 3 entries");
        std::copy(v.begin(), v.end(), c.encoder_channels.begin());
    }
    if (kv.has("model.token_dims")) {
        auto v = parse_int_list(kv.get("model.token_dims"), "model.token_dims");
        if (v.size() != 2) throw Error("model.token_dims needs exactly 2 entries");
        std::copy(v.begin(), v.end(), c.token_dims.begin());
    }
    if (kv.has("model.spline_intervals"))
        c.spline_intervals = static_cast<int>(parse_int(kv.get("model.spline_intervals"), "model.spline_intervals"));
    if (kv.has("model.spline_order"))
        c.spline_order = static_cast<int>(parse_int(kv.get("model.spline_order"), "model.spline_order"));
    if (kv.has("model.kan_base_path")) c.kan_base_path = parse_bool(kv.get("model.kan_base_path"), "model.kan_base_path");
    if (kv.has("model.seed")) c.seed = static_cast<std::uint64_t>(parse_int(kv.get("model.seed"), "model.seed"));
    if (kv.has("model.dtype")) {
        const auto& d = kv.get("model.dtype");
        if (d == "float32") c.dtype = DType::f32;
        else if (d == "float64") c.dtype = DType::f64;
        else throw Error("model.dtype must be float32 or float64");
    }
    c.validate();
    return c;
}

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv3d: return "conv3d";
        case LayerKind::instance_norm: return "instance_norm";
        case LayerKind::relu: return "relu";
        case LayerKind::max_pool: return "max_pool";
        case LayerKind::upsample: return "upsample";
        case LayerKind::concat: return "concat";
        case LayerKind::tok_kan: return "tok_kan";
        case LayerKind::eca: return "eca";
        case LayerKind::esa: return "esa";
        case LayerKind::spatial_self_attention: return "spatial_self_attention";
    }
    return "?";
}

std::size_t NetworkGraph::count_layers(LayerKind kind) const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.kind == kind;
    return n;
}

namespace {

class GraphBuilder {
public:
    GraphBuilder(ParameterStore& store, std::vector<LayerDesc>& layers, Initializer& init)
        : store_(store), layers_(layers), init_(init) {}

    LayerDesc& push(LayerDesc d) {
        layers_.push_back(std::move(d));
        return layers_.back();
    }

    void simple(const std::string& name, LayerKind kind, std::int64_t channels, int level) {
        LayerDesc d;
        d.name = name;
        d.kind = kind;
        d.in_channels = d.out_channels = channels;
        d.in_level = level;
        push(std::move(d));
    }

    void concat(const std::string& name, std::int64_t a, std::int64_t b, int level) {
        LayerDesc d;
        d.name = name;
        d.kind = LayerKind::concat;
        d.in_channels = a;
        d.out_channels = a + b;
        d.in_level = level;
        push(std::move(d));
    }

    std::pair<Tensor, Tensor> conv(const std::string& name, std::int64_t cin, std::int64_t cout, int k,
                                   int level, double gain) {
        const std::int64_t kk = k;
        Tensor w = store_.add(name + ".weight", init_.kaiming_uniform({cout, cin, kk, kk, kk}, cin * kk * kk * kk, gain));
        Tensor b = store_.add(name + ".bias", init_.zeros({cout}));
        LayerDesc d;
        d.name = name;
        d.kind = LayerKind::conv3d;
        d.in_channels = cin;
        d.out_channels = cout;
        d.kernel = k;
        d.bias = true;
        d.in_level = level;
        d.params = {name + ".weight", name + ".bias"};
        push(std::move(d));
        return {w, b};
    }

    std::pair<Tensor, Tensor> norm(const std::string& name, std::int64_t c, int level) {
        Tensor g = store_.add(name + ".gain", init_.ones({c}));
        Tensor o = store_.add(name + ".offset", init_.zeros({c}));
        LayerDesc d;
        d.name = name;
        d.kind = LayerKind::instance_norm;
        d.in_channels = d.out_channels = c;
        d.in_level = level;
        d.params = {name + ".gain", name + ".offset"};
        push(std::move(d));
        return {g, o};
    }

    ConvBlock conv_block(const std::string& name, std::int64_t cin, std::int64_t cout, int level) {
        ConvBlock b;
        std::tie(b.w1, b.b1) = conv(name + ".conv1", cin, cout, 3, level, std::sqrt(2.0));
        std::tie(b.g1, b.o1) = norm(name + ".norm1", cout, level);
        simple(name + ".relu1", LayerKind::relu, cout, level);
        std::tie(b.w2, b.b2) = conv(name + ".conv2", cout, cout, 3, level, std::sqrt(2.0));
        std::tie(b.g2, b.o2) = norm(name + ".norm2", cout, level);
        simple(name + ".relu2", LayerKind::relu, cout, level);
        return b;
    }

    EcaModule eca(const std::string& name, std::int64_t channels, int level) {
        const int k = eca_kernel_size(channels);
        EcaModule m = make_eca(store_, init_, name, k);
        LayerDesc d;
        d.name = name;
        d.kind = LayerKind::eca;
        d.in_channels = d.out_channels = channels;
        d.kernel = k;
        d.in_level = level;
        d.params = {name + ".weight"};
        push(std::move(d));
        return m;
    }

    EsaModule esa(const std::string& name, std::int64_t channels, int level) {
        EsaModule m = make_esa(store_, init_, name, 7);
        LayerDesc d;
        d.name = name;
        d.kind = LayerKind::esa;
        d.in_channels = d.out_channels = channels;
        d.kernel = 7;
        d.in_level = level;
        d.params = {name + ".weight"};
        push(std::move(d));
        return m;
    }

    SpatialSelfAttention self_attention(const std::string& name, std::int64_t channels, int level) {
        const std::size_t before = store_.size();
        SpatialSelfAttention m = make_spatial_self_attention(store_, init_, name, channels);
        LayerDesc d;
        d.name = name;
        d.kind = LayerKind::spatial_self_attention;
        d.in_channels = d.out_channels = channels;
        d.in_level = level;
        d.heads = m.attn.heads;
        for (std::size_t i = before; i < store_.size(); ++i) d.params.push_back(store_.entries()[i].first);
        push(std::move(d));
        return m;
    }

    TokKanBlock tok_kan(const std::string& name, std::int64_t cin, std::int64_t embed, int stride, int level,
                        const SplineGrid& grid, bool base) {
        const std::size_t before = store_.size();
        TokKanBlock b = make_tok_kan_block(store_, init_, name, cin, embed, stride, grid, base);
        LayerDesc d;
        d.name = name;
        d.kind = LayerKind::tok_kan;
        d.in_channels = cin;
        d.out_channels = embed;
        d.kernel = 3;
        d.stride = stride;
        d.in_level = level;
        d.kan_base = base;
        for (std::size_t i = before; i < store_.size(); ++i) d.params.push_back(store_.entries()[i].first);
        push(std::move(d));
        return b;
    }

private:
    ParameterStore& store_;
    std::vector<LayerDesc>& layers_;
    Initializer& init_;
};

Tensor conv_block_forward(const Tensor& x, const ConvBlock& b) {
    const ConvSpec same = ConvSpec::same3d(3);
    Tensor h = relu(normalize(convolve(x, b.w1, b.b1, same), NormKind::instance, b.g1, b.o1));
    return relu(normalize(convolve(h, b.w2, b.b2, same), NormKind::instance, b.g2, b.o2));
}

std::int64_t half_width(std::int64_t c) { return std::max<std::int64_t>(1, c / 2); }

}  // namespace

NetworkGraph build_model(const ModelConfig& config) {
    config.validate();
    NetworkGraph g;
    g.config_ = config;
    g.layout_ = variant_layout(config.variant);
    Initializer init(config.seed, config.dtype);
    GraphBuilder b(g.params_, g.layers_, init);
    const auto& c = config.encoder_channels;
    const auto& e = config.token_dims;
    const SplineGrid grid = config.grid();

    std::int64_t prev = config.in_channels;
    for (int l = 0; l < 3; ++l) {
        const std::string name = "enc" + std::to_string(l + 1);
        if (l > 0) b.simple(name + ".pool", LayerKind::max_pool, prev, l - 1);
        g.encoder_[l] = b.conv_block(name, prev, c[l], l);
        auto& att = g.encoder_attention_[l];
        switch (g.layout_.encoder) {
            case EncoderAttention::none: break;
            case EncoderAttention::eca: att.eca = b.eca(name + ".eca", c[l], l); break;
            case EncoderAttention::esa: att.esa = b.esa(name + ".esa", c[l], l); break;
            case EncoderAttention::eca_esa:
                att.eca = b.eca(name + ".eca", c[l], l);
                att.esa = b.esa(name + ".esa", c[l], l);
                break;
            case EncoderAttention::self_attention:
                att.self_attention = b.self_attention(name + ".attn", c[l], l);
                break;
        }
        prev = c[l];
    }

    g.tok1_ = b.tok_kan("tok1", c[2], e[0], 2, 2, grid, config.kan_base_path);
    g.tok2_ = b.tok_kan("tok2", e[0], e[1], 2, 3, grid, config.kan_base_path);
    b.simple("dtok1.up", LayerKind::upsample, e[1], 4);
    b.concat("dtok1.concat", e[1], e[0], 3);
    g.dec_tok1_ = b.tok_kan("dtok1", e[1] + e[0], e[0], 1, 3, grid, config.kan_base_path);
    b.simple("dtok2.up", LayerKind::upsample, e[0], 3);
    b.concat("dtok2.concat", e[0], c[2], 2);
    g.dec_tok2_ = b.tok_kan("dtok2", e[0] + c[2], c[2], 1, 2, grid, config.kan_base_path);

    std::array<std::int64_t, 2> skip{c[0], c[1]};
    if (g.layout_.pfa) {
        const PfaMode mode = *g.layout_.pfa;
        skip = pfa_skip_channels(c);
        std::int64_t deeper = c[2];
        for (int l = 1; l >= 0; --l) {
            const std::string name = "pfa" + std::to_string(l + 1);
            if (mode == PfaMode::eca_before_pfa) g.pfa_.eca[l] = b.eca(name + ".eca", c[l], l);
            b.simple(name + ".up", LayerKind::upsample, deeper, l + 1);
            b.concat(name + ".concat", deeper, c[l], l);
            const std::int64_t fused = deeper + c[l];
            switch (mode) {
                case PfaMode::eca_after_pfa: g.pfa_.eca[l] = b.eca(name + ".eca", fused, l); break;
                case PfaMode::eca_before_pfa:
                case PfaMode::no_eca: break;
                case PfaMode::esa_after_pfa: g.pfa_.esa[l] = b.esa(name + ".esa", fused, l); break;
                case PfaMode::eca_and_esa:
                    g.pfa_.eca[l] = b.eca(name + ".eca", fused, l);
                    g.pfa_.esa[l] = b.esa(name + ".esa", fused, l);
                    break;
                case PfaMode::self_attention:
                    g.pfa_.self_attention[l] = b.self_attention(name + ".attn", fused, l);
                    break;
            }
            deeper = fused;
        }
    } else if (g.layout_.eca_on_skips) {
        for (int l = 1; l >= 0; --l) g.skip_eca_[l] = b.eca("skip" + std::to_string(l + 1) + ".eca", c[l], l);
    }

    b.simple("dec2.up", LayerKind::upsample, c[2], 2);
    b.concat("dec2.concat", c[2], skip[1], 1);
    const std::int64_t d2 = half_width(c[2] + skip[1]);
    g.dec2_ = b.conv_block("dec2", c[2] + skip[1], d2, 1);
    b.simple("dec1.up", LayerKind::upsample, d2, 1);
    b.concat("dec1.concat", d2, skip[0], 0);
    const std::int64_t d1 = half_width(d2 + skip[0]);
    g.dec1_ = b.conv_block("dec1", d2 + skip[0], d1, 0);
    std::tie(g.head_weight_, g.head_bias_) = b.conv("head", d1, config.num_classes, 1, 0, 1.0);
    return g;
}

Tensor NetworkGraph::forward(const Tensor& volume) const {
    if (volume.rank() != 5 || volume.dim(1) != config_.in_channels)
        throw ShapeError("model expects [B, " + std::to_string(config_.in_channels) + ", D, H, W], got " +
                         shape_str(volume.shape()));
    for (int a = 2; a < 5; ++a)
        if (volume.dim(a) % 16 != 0)
            throw ShapeError("model input extents must be divisible by 16, got " + shape_str(volume.shape()));
    if (volume.dtype() != config_.dtype) throw DTypeError("model input dtype does not match model dtype");

    std::array<Tensor, 3> feats;
    Tensor x = volume;
    for (int l = 0; l < 3; ++l) {
        if (l > 0) x = max_pool3d(x);
        x = conv_block_forward(x, encoder_[l]);
        const auto& att = encoder_attention_[l];
        if (att.eca) x = eca_forward(x, *att.eca);
        if (att.esa) x = esa_forward(x, *att.esa);
        if (att.self_attention) x = spatial_self_attention_forward(x, *att.self_attention);
        feats[l] = x;
    }

    Tensor t1 = tok_kan_block(feats[2], tok1_);
    Tensor t2 = tok_kan_block(t1, tok2_);
    Tensor d = tok_kan_block(concat({trilinear_upsample(t2), t1}, 1), dec_tok1_);
    d = tok_kan_block(concat({trilinear_upsample(d), feats[2]}, 1), dec_tok2_);

    std::array<Tensor, 2> skips{feats[0], feats[1]};
    if (layout_.pfa) {
        skips = pfa_fuse(PyramidFeatures{feats}, pfa_, *layout_.pfa).skips;
    } else {
        for (int l = 0; l < 2; ++l)
            if (skip_eca_[l]) skips[l] = eca_forward(skips[l], *skip_eca_[l]);
    }

    d = conv_block_forward(concat({trilinear_upsample(d), skips[1]}, 1), dec2_);
    d = conv_block_forward(concat({trilinear_upsample(d), skips[0]}, 1), dec1_);
    return convolve(d, head_weight_, head_bias_, ConvSpec{});
}

Tensor model_forward(const NetworkGraph& graph, const Tensor& volume) { return graph.forward(volume); }

std::int64_t count_params(const NetworkGraph& graph) { return graph.parameters().element_count(); }

std::int64_t layer_flops(const LayerDesc& l, std::int64_t batch, const std::array<std::int64_t, 3>& input,
                         const SplineGrid& grid) {
    std::int64_t vox = 1;
    for (auto s : input) vox *= s >> l.in_level;
    const std::int64_t B = batch, cin = l.in_channels, cout = l.out_channels;
    switch (l.kind) {
        case LayerKind::conv3d: {
            const std::int64_t kv = std::int64_t{l.kernel} * l.kernel * l.kernel;
            const std::int64_t out = vox / (std::int64_t{l.stride} * l.stride * l.stride);
            return 2 * cout * (cin / l.groups) * kv * out * B + (l.bias ? cout * out * B : 0);
        }
        case LayerKind::instance_norm: return 7 * cin * vox * B;
        case LayerKind::relu: return cin * vox * B;
        case LayerKind::max_pool: return 7 * cin * (vox / 8) * B;
        case LayerKind::upsample: return 15 * cin * vox * 8 * B;
        case LayerKind::concat: return 0;
        case LayerKind::tok_kan: {
            const std::int64_t s3 = std::int64_t{l.stride} * l.stride * l.stride;
            const std::int64_t N = vox / s3 * B, E = cout, k = grid.order;
            const std::int64_t nb = grid.basis_count();
            std::int64_t f = 2 * E * cin * 27 * N + E * N;    // patch conv
            f += (2 * k + 5 * k * (k + 1) / 2) * N * E;       // basis evaluation
            f += 2 * N * E * E * nb;                          // spline contraction
            if (l.kan_base) f += 5 * N * E + 2 * N * E * E + N * E;  // silu, base matmul, sum
            f += 2 * E * 27 * N;                              // depth-wise conv
            f += N * E;                                       // residual
            f += 7 * N * E;                                   // layer norm
            return f;
        }
        case LayerKind::eca: return cin * vox * B + 2 * l.kernel * cin * B + 4 * cin * B + cin * vox * B;
        case LayerKind::esa: {
            const std::int64_t k3 = std::int64_t{l.kernel} * l.kernel * l.kernel;
            return cin * vox * B + 2 * k3 * vox * B + 4 * vox * B + cin * vox * B;
        }
        case LayerKind::spatial_self_attention: {
            const std::int64_t C = cin, T = vox / 8, h = l.heads;
            std::int64_t f = 2 * C * C * 27 * T * B + C * T * B;  // patch conv
            f += 4 * 2 * T * C * C * B;                           // q, k, v, o projections
            f += 2 * T * T * C * B + T * T * h * B;               // scores + scaling
            f += 5 * T * T * h * B;                               // softmax
            f += 2 * T * T * C * B + T * C * B;                   // context + residual
            f += 15 * C * vox * B;                                // upsample
            f += 2 * C * C * vox * B + C * vox * B;               // projection
            f += C * vox * B;                                     // residual
            return f;
        }
    }
    return 0;
}

FlopReport count_flops(const NetworkGraph& graph, const Shape& input_shape) {
    if (input_shape.size() != 5) throw ShapeError("count_flops expects [B, C, D, H, W]");
    for (int a = 2; a < 5; ++a)
        if (input_shape[a] % 16 != 0) throw ShapeError("count_flops: extents must be divisible by 16");
    FlopReport r;
    const std::array<std::int64_t, 3> in{input_shape[2], input_shape[3], input_shape[4]};
    const SplineGrid grid = graph.config().grid();
    for (const auto& l : graph.layers()) {
        const std::int64_t f = layer_flops(l, input_shape[0], in, grid);
        r.per_layer.emplace_back(l.name, f);
        r.total += f;
    }
    return r;
}

}  // namespace ukan
