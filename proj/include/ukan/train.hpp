#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ukan/checkpoint.hpp"
#include "ukan/data.hpp"
#include "ukan/dataset.hpp"
#include "ukan/losses.hpp"
#include "ukan/metrics.hpp"
#include "ukan/model.hpp"
#include "ukan/optim.hpp"

namespace ukan {

struct TrainConfig {
    ModelConfig model;
    ScheduleConfig schedule;
    AdamConfig adam;
    std::int64_t batch_size = 2;
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::dynamic;
    CeReduction ce_reduction = CeReduction::mean;
    std::int64_t checkpoint_every = 10;  // 0: only the final checkpoint
    bool augment = true;
    AugmentConfig augment_cfg;
    std::string manifest;
    std::string output_dir = "run";

    void validate() const;
    // Flat "section.key = value" text; unknown keys are rejected on read.
    std::string to_text() const;
    static TrainConfig from_kv(const KeyValues& kv);
    static TrainConfig load(const std::string& path);
};

// One row of the per-epoch loss CSV; epochs are numbered from 1.
struct EpochStats {
    std::int64_t epoch = 0;
    double lr = 0, total = 0, ce = 0, dice = 0, alpha = 0;
    double train_soft_dice = 0;
    double val_soft_dice = 0;  // NaN without a validation split
};

inline constexpr const char* kLossCsvHeader = "epoch,lr,total,ce,dice,alpha,train_soft_dice,val_soft_dice";
std::string loss_csv(const std::vector<EpochStats>& history);

struct TrainOptions {
    std::optional<std::string> resume;
    std::function<void(const EpochStats&)> on_epoch;
    bool write_files = true;  // loss.csv and checkpoints under output_dir
};

struct TrainResult {
    NetworkGraph graph;
    std::vector<EpochStats> history;
    std::string final_checkpoint;
};

// Trains on in-memory samples; `val` may be empty.
TrainResult train_samples(const TrainConfig& cfg, const std::vector<SampleVolume>& train,
                          const std::vector<SampleVolume>& val, const TrainOptions& opts = {});
// Loads the manifest: rows with split "train" (or every row when no row has
// a split) train, rows with split "val" validate.
TrainResult train(const TrainConfig& cfg, const TrainOptions& opts = {});

Checkpoint make_checkpoint(const TrainConfig& cfg, const NetworkGraph& graph, const AdamState& adam,
                           std::int64_t epochs_done, const std::string& rng_state,
                           const std::vector<EpochStats>& history);
// Rebuilds the model stored in a checkpoint.
NetworkGraph load_model(const Checkpoint& ck);
void load_parameters(NetworkGraph& graph, const Checkpoint& ck);

// Mean over samples of 1 - dice_loss, forward only.
double mean_soft_dice(const NetworkGraph& graph, const std::vector<SampleVolume>& samples);
// Argmax of the logits, [D, H, W].
std::vector<std::uint8_t> predict_labels(const NetworkGraph& graph, const SampleVolume& sample);

// Per-case metrics for every manifest row, plus summary. Writes the long CSV
// to `out_csv` and the wide table next to it (".table.csv").
MetricsReport evaluate(const std::string& checkpoint_path, const std::string& manifest_path,
                       const std::string& out_csv);

}  // namespace ukan
