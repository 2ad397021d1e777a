#include "ukan/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "ukan/nn.hpp"
#include "ukan/ops.hpp"

namespace ukan {

namespace fs = std::filesystem;

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "model.variant", "model.in_channels", "model.num_classes", "model.encoder_channels", "model.token_dims",
        "model.spline_intervals", "model.spline_order", "model.kan_base_path", "model.seed", "model.dtype",
        "train.epochs", "train.warmup_epochs", "train.lr_start", "train.lr_peak", "train.batch_size",
        "train.weight_decay", "train.beta1", "train.beta2", "train.eps", "train.seed", "train.loss_mode",
        "train.ce_reduction", "train.checkpoint_every", "augment.enabled", "augment.crop",
        "augment.flip_probability", "augment.noise_sigma", "augment.max_rotation_deg", "augment.contrast_lo",
        "augment.contrast_hi", "data.manifest", "output.dir"};
    return keys;
}

std::string fmt(double v) { return format_double(v); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
    if (!f) throw Error("write failed for '" + path + "'");
}

std::string join_ids(const std::vector<const SampleVolume*>& batch) {
    std::string s;
    for (const auto* b : batch) s += (s.empty() ? "" : ", ") + b->case_id;
    return s;
}

// softmax over classes, one-hot truth, per-sample CE and Dice: [B] each.
std::pair<Tensor, Tensor> sample_losses(const Tensor& logits, const std::vector<std::uint8_t>& labels,
                                        CeReduction reduction) {
    const Tensor probs = softmax(logits, 1);
    const Shape spatial(logits.shape().begin() + 2, logits.shape().end());
    const Tensor truth = one_hot(labels, spatial, logits.dim(0), logits.dim(1), logits.dtype());
    return {cross_entropy(probs, truth, reduction), dice_loss(probs, truth)};
}

std::string rng_text(const std::mt19937_64& rng) {
    std::ostringstream s;
    s << rng;
    return s.str();
}

std::vector<std::int64_t> rng_words(const std::string& text) {
    std::istringstream s(text);
    std::vector<std::int64_t> out;
    std::uint64_t w;
    while (s >> w) out.push_back(static_cast<std::int64_t>(w));
    return out;
}

std::string rng_from_words(const std::vector<std::int64_t>& words) {
    std::string out;
    for (auto w : words) out += (out.empty() ? "" : " ") + std::to_string(static_cast<std::uint64_t>(w));
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    model.validate();
    schedule.validate();
    if (batch_size < 1) throw Error("train.batch_size must be positive");
    if (!(adam.eps > 0 && adam.weight_decay >= 0 && adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 &&
          adam.beta2 < 1))
        throw Error("train: optimizer settings out of range");
    if (checkpoint_every < 0) throw Error("train.checkpoint_every must be >= 0");
}

std::string TrainConfig::to_text() const {
    KeyValues kv;
    model.write(kv);
    kv.set("train.epochs", std::to_string(schedule.epochs));
    kv.set("train.warmup_epochs", std::to_string(schedule.warmup_epochs));
    kv.set("train.lr_start", fmt(schedule.lr_start));
    kv.set("train.lr_peak", fmt(schedule.lr_peak));
    kv.set("train.batch_size", std::to_string(batch_size));
    kv.set("train.weight_decay", fmt(adam.weight_decay));
    kv.set("train.beta1", fmt(adam.beta1));
    kv.set("train.beta2", fmt(adam.beta2));
    kv.set("train.eps", fmt(adam.eps));
    kv.set("train.seed", std::to_string(seed));
    kv.set("train.loss_mode", loss_mode_name(loss_mode));
    kv.set("train.ce_reduction", ce_reduction_name(ce_reduction));
    kv.set("train.checkpoint_every", std::to_string(checkpoint_every));
    kv.set("augment.enabled", augment ? "true" : "false");
    kv.set("augment.crop", join_ints({augment_cfg.crop.d, augment_cfg.crop.h, augment_cfg.crop.w}));
    kv.set("augment.flip_probability", fmt(augment_cfg.flip_probability));
    kv.set("augment.noise_sigma", fmt(augment_cfg.noise_sigma));
    kv.set("augment.max_rotation_deg", fmt(augment_cfg.max_rotation_deg));
    kv.set("augment.contrast_lo", fmt(augment_cfg.contrast_lo));
    kv.set("augment.contrast_hi", fmt(augment_cfg.contrast_hi));
    kv.set("data.manifest", manifest);
    kv.set("output.dir", output_dir);
    return kv.to_text();
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
    for (const auto& [k, v] : kv.entries())
        if (!known_keys().count(k)) throw Error("unknown config key '" + k + "'");
    TrainConfig c;
    c.model = ModelConfig::read(kv);
    auto i64 = [&](const char* k, std::int64_t& dst) {
        if (kv.has(k)) dst = parse_int(kv.get(k), k);
    };
    auto f64 = [&](const char* k, double& dst) {
        if (kv.has(k)) dst = parse_double(kv.get(k), k);
    };
    i64("train.epochs", c.schedule.epochs);
    i64("train.warmup_epochs", c.schedule.warmup_epochs);
    f64("train.lr_start", c.schedule.lr_start);
    f64("train.lr_peak", c.schedule.lr_peak);
    i64("train.batch_size", c.batch_size);
    f64("train.weight_decay", c.adam.weight_decay);
    f64("train.beta1", c.adam.beta1);
    f64("train.beta2", c.adam.beta2);
    f64("train.eps", c.adam.eps);
    if (kv.has("train.seed")) c.seed = static_cast<std::uint64_t>(parse_int(kv.get("train.seed"), "train.seed"));
    if (kv.has("train.loss_mode")) c.loss_mode = parse_loss_mode(kv.get("train.loss_mode"));
    if (kv.has("train.ce_reduction")) c.ce_reduction = parse_ce_reduction(kv.get("train.ce_reduction"));
    i64("train.checkpoint_every", c.checkpoint_every);
    if (kv.has("augment.enabled")) c.augment = parse_bool(kv.get("augment.enabled"), "augment.enabled");
    if (kv.has("augment.crop")) {
        const auto v = parse_int_list(kv.get("augment.crop"), "augment.crop");
        if (v.size() != 3) throw Error("augment.crop needs 3 extents");
        c.augment_cfg.crop = {v[0], v[1], v[2]};
    }
    f64("augment.flip_probability", c.augment_cfg.flip_probability);
    f64("augment.noise_sigma", c.augment_cfg.noise_sigma);
    f64("augment.max_rotation_deg", c.augment_cfg.max_rotation_deg);
    f64("augment.contrast_lo", c.augment_cfg.contrast_lo);
    f64("augment.contrast_hi", c.augment_cfg.contrast_hi);
    c.manifest = kv.get_or("data.manifest", "");
    c.output_dir = kv.get_or("output.dir", c.output_dir);
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) { return from_kv(KeyValues::load(path)); }

std::string loss_csv(const std::vector<EpochStats>& history) {
    std::string out = std::string(kLossCsvHeader) + "\n";
    for (const auto& s : history)
        out += std::to_string(s.epoch) + "," + fmt(s.lr) + "," + fmt(s.total) + "," + fmt(s.ce) + "," + fmt(s.dice) +
               "," + fmt(s.alpha) + "," + fmt(s.train_soft_dice) + "," +
               (std::isnan(s.val_soft_dice) ? std::string("nan") : fmt(s.val_soft_dice)) + "\n";
    return out;
}

Checkpoint make_checkpoint(const TrainConfig& cfg, const NetworkGraph& graph, const AdamState& adam,
                           std::int64_t epochs_done, const std::string& rng_state,
                           const std::vector<EpochStats>& history) {
    Checkpoint ck;
    ck.config = cfg.to_text();
    for (const auto& [name, t] : graph.parameters().entries()) ck.records.push_back(CheckpointRecord::from_tensor(name, t));
    for (const auto& [name, t] : graph.parameters().entries()) {
        const auto it = adam.m.find(name);
        if (it == adam.m.end()) continue;
        ck.records.push_back(CheckpointRecord::from_doubles("adam.m/" + name, it->second));
        ck.records.push_back(CheckpointRecord::from_doubles("adam.v/" + name, adam.v.at(name)));
    }
    ck.records.push_back(CheckpointRecord::from_ints("state/epoch", {epochs_done}));
    ck.records.push_back(CheckpointRecord::from_ints("state/adam_step", {adam.step}));
    ck.records.push_back(CheckpointRecord::from_ints("state/rng", rng_words(rng_state)));
    std::vector<double> h;
    for (const auto& s : history)
        h.insert(h.end(), {double(s.epoch), s.lr, s.total, s.ce, s.dice, s.alpha, s.train_soft_dice, s.val_soft_dice});
    auto rec = CheckpointRecord::from_doubles("state/history", h);
    rec.shape = {static_cast<std::int64_t>(history.size()), 8};
    ck.records.push_back(std::move(rec));
    return ck;
}

void load_parameters(NetworkGraph& graph, const Checkpoint& ck) {
    for (const auto& [name, t] : graph.parameters().entries()) {
        const CheckpointRecord* r = ck.find(name);
        if (!r) throw Error("checkpoint lacks parameter '" + name + "'");
        if (r->shape != t.shape())
            throw ShapeError("checkpoint parameter '" + name + "' has shape " + shape_str(r->shape) + ", model expects " +
                             shape_str(t.shape()));
        const Tensor src = r->to_tensor().to(t.dtype());
        Tensor* dst = graph.parameters().find(name);
        dispatch(t.dtype(), [&]<class T>(T) {
            auto s = src.data<T>();
            std::copy(s.begin(), s.end(), dst->mutable_data<T>().begin());
        });
    }
}

NetworkGraph load_model(const Checkpoint& ck) {
    const TrainConfig cfg = TrainConfig::from_kv(KeyValues::parse(ck.config));
    NetworkGraph g = build_model(cfg.model);
    load_parameters(g, ck);
    return g;
}

double mean_soft_dice(const NetworkGraph& graph, const std::vector<SampleVolume>& samples) {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    NoGradScope ng;
    double acc = 0;
    for (const auto& s : samples) {
        const Tensor logits = graph.forward(stack_images({&s}, graph.config().dtype));
        acc += 1.0 - sample_losses(logits, s.labels, CeReduction::mean).second.item();
    }
    return acc / static_cast<double>(samples.size());
}

std::vector<std::uint8_t> predict_labels(const NetworkGraph& graph, const SampleVolume& sample) {
    NoGradScope ng;
    const Tensor logits = graph.forward(stack_images({&sample}, graph.config().dtype));
    const std::int64_t C = logits.dim(1), V = sample.ext.voxels();
    const auto v = logits.to_vector();
    std::vector<std::uint8_t> out(V);
    for (std::int64_t i = 0; i < V; ++i) {
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < C; ++c)
            if (v[c * V + i] > v[best * V + i]) best = c;
        out[i] = static_cast<std::uint8_t>(best);
    }
    return out;
}

TrainResult train_samples(const TrainConfig& cfg, const std::vector<SampleVolume>& train_set,
                          const std::vector<SampleVolume>& val, const TrainOptions& opts) {
    cfg.validate();
    if (train_set.empty()) throw Error("no training cases");
    for (const auto& s : train_set) {
        s.validate();
        if (cfg.augment) cfg.augment_cfg.validate(s.ext);
    }
    TrainResult res{build_model(cfg.model), {}, {}};
    NetworkGraph& graph = res.graph;
    AdamState adam;
    std::mt19937_64 order_rng(cfg.seed);
    std::int64_t start = 0;
    if (opts.resume) {
        const Checkpoint ck = Checkpoint::load(*opts.resume);
        load_parameters(graph, ck);
        for (const auto& [name, t] : graph.parameters().entries()) {
            if (const auto* m = ck.find("adam.m/" + name)) {
                adam.m[name] = m->doubles();
                adam.v[name] = ck.get("adam.v/" + name).doubles();
            }
        }
        adam.step = ck.get("state/adam_step").ints().at(0);
        start = ck.get("state/epoch").ints().at(0);
        std::istringstream(rng_from_words(ck.get("state/rng").ints())) >> order_rng;
        const auto& hist = ck.get("state/history");
        const auto h = hist.doubles();
        for (std::size_t i = 0; i + 8 <= h.size(); i += 8)
            res.history.push_back({static_cast<std::int64_t>(h[i]), h[i + 1], h[i + 2], h[i + 3], h[i + 4], h[i + 5],
                                   h[i + 6], h[i + 7]});
        if (start > cfg.schedule.epochs) throw Error("checkpoint epoch exceeds the configured epochs");
    }
    if (opts.write_files) fs::create_directories(cfg.output_dir);

    auto save = [&](std::int64_t done, const std::string& file) {
        const std::string path = (fs::path(cfg.output_dir) / file).string();
        make_checkpoint(cfg, graph, adam, done, rng_text(order_rng), res.history).save(path);
        return path;
    };

    std::vector<std::size_t> order(train_set.size());
    for (std::int64_t epoch = start; epoch < cfg.schedule.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg.schedule);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), order_rng);
        EpochStats st;
        st.epoch = epoch + 1;
        st.lr = lr;
        std::size_t seen = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            std::vector<SampleVolume> owned;
            std::vector<const SampleVolume*> batch;
            for (std::size_t k = b0; k < std::min(order.size(), b0 + cfg.batch_size); ++k) {
                const SampleVolume& s = train_set[order[k]];
                if (cfg.augment) owned.push_back(augment(s, cfg.augment_cfg, sample_seed(cfg.seed, s.case_id, epoch)));
                else owned.push_back(s);
            }
            for (const auto& s : owned) batch.push_back(&s);

            Tape tape;
            LossBreakdown lb;
            GradientMap grads;
            try {
                GradScope scope(tape);
                const Tensor logits = graph.forward(stack_images(batch, cfg.model.dtype));
                const auto [ce, dice] = sample_losses(logits, stack_labels(batch), cfg.ce_reduction);
                lb = combine_losses(ce, dice, cfg.loss_mode);
                if (!std::isfinite(lb.total.item())) throw Error("non-finite total loss");
                grads = tape.backward(lb.total);
            } catch (const Error& e) {
                throw Error("epoch " + std::to_string(epoch + 1) + ", batch [" + join_ids(batch) + "]: " + e.what());
            }
            adamw_step(graph.parameters(), grads, adam, lr, cfg.adam);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const double a = lb.alpha[i];
                st.total += (1 - a) * lb.ce[i] + a * lb.dice[i];
                st.ce += lb.ce[i];
                st.dice += lb.dice[i];
                st.alpha += a;
            }
            seen += batch.size();
        }
        const double n = static_cast<double>(seen);
        st.total /= n;
        st.ce /= n;
        st.dice /= n;
        st.alpha /= n;
        st.train_soft_dice = 1.0 - st.dice;
        st.val_soft_dice = mean_soft_dice(graph, val);
        res.history.push_back(st);
        if (opts.on_epoch) opts.on_epoch(st);
        if (opts.write_files) {
            write_text((fs::path(cfg.output_dir) / "loss.csv").string(), loss_csv(res.history));
            const std::int64_t done = epoch + 1;
            if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.schedule.epochs) {
                char name[64];
                std::snprintf(name, sizeof name, "checkpoint_epoch%04lld.ukep", static_cast<long long>(done));
                save(done, name);
            }
        }
    }
    if (opts.write_files) {
        write_text((fs::path(cfg.output_dir) / "loss.csv").string(), loss_csv(res.history));
        res.final_checkpoint = save(cfg.schedule.epochs, "final.ukep");
    }
    return res;
}

TrainResult train(const TrainConfig& cfg, const TrainOptions& opts) {
    if (cfg.manifest.empty()) throw Error("data.manifest is not set");
    const Manifest m = Manifest::load(cfg.manifest);
    const bool any_split = std::any_of(m.entries.begin(), m.entries.end(), [](const auto& e) { return !e.split.empty(); });
    std::vector<SampleVolume> tr, va;
    for (const auto& e : m.entries) {
        if (!any_split || e.split == "train") tr.push_back(load_case(m, e));
        else if (e.split == "val") va.push_back(load_case(m, e));
    }
    return train_samples(cfg, tr, va, opts);
}

MetricsReport evaluate(const std::string& checkpoint_path, const std::string& manifest_path,
                       const std::string& out_csv) {
    const Checkpoint ck = Checkpoint::load(checkpoint_path);
    const NetworkGraph graph = load_model(ck);
    const Manifest m = Manifest::load(manifest_path);
    std::vector<CaseMetrics> cases;
    for (const auto& e : m.entries) {
        const SampleVolume s = load_case(m, e);
        if (s.ext.d % 16 || s.ext.h % 16 || s.ext.w % 16)
            throw ShapeError("case " + s.case_id + ": extents must be divisible by 16 for this model");
        cases.push_back(case_metrics(s.case_id, predict_labels(graph, s), s.labels, s.ext, s.spacing));
    }
    MetricsReport r = summarize(cases);
    write_text(out_csv, report_csv(r));
    fs::path table(out_csv);
    table.replace_extension(".table.csv");
    write_text(table.string(), report_table_csv(r, variant_name(graph.config().variant)));
    return r;
}

}  // namespace ukan
