// Command-line front end: train, eval, phantom, flops.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ukan/dataset.hpp"
#include "ukan/train.hpp"

namespace fs = std::filesystem;
using namespace ukan;

namespace {

void print_epoch(const EpochStats& s) {
    std::fprintf(stderr, "epoch %4lld  lr %.6f  loss %.5f  ce %.5f  dice %.5f  alpha %.3f  soft-dice %.4f\n",
                 static_cast<long long>(s.epoch), s.lr, s.total, s.ce, s.dice, s.alpha, s.train_soft_dice);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UKAN-EP 3D segmentation: training, evaluation, phantoms and cost accounting"};
    app.require_subcommand(1);

    std::string config_path, resume, checkpoint, manifest, out;
    std::optional<std::uint64_t> seed;
    std::int64_t n_cases = 4, size = 32, n_val = 0, batch = 1;

    auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
    train_cmd->add_option("--config", config_path, "key = value config file")->required();
    train_cmd->add_option("--resume", resume, "checkpoint to resume from");
    train_cmd->add_option("--seed", seed, "override train.seed and model.seed");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    eval_cmd->add_option("--checkpoint", checkpoint)->required();
    eval_cmd->add_option("--manifest", manifest)->required();
    eval_cmd->add_option("--out", out, "per-case metrics CSV; the table goes to <out>.table.csv")->required();
    eval_cmd->add_option("--seed", seed, "accepted for symmetry; evaluation is deterministic");

    auto* ph_cmd = app.add_subcommand("phantom", "write synthetic cases and a manifest");
    ph_cmd->add_option("--n", n_cases, "number of cases")->check(CLI::PositiveNumber);
    ph_cmd->add_option("--size", size, "cubic extent per axis")->check(CLI::Range(16, 512));
    ph_cmd->add_option("--val", n_val, "mark the last N cases as validation")->check(CLI::NonNegativeNumber);
    ph_cmd->add_option("--seed", seed, "base seed");
    ph_cmd->add_option("--out", out, "output directory")->required();

    auto* fl_cmd = app.add_subcommand("flops", "parameter and FLOP counts for a config");
    fl_cmd->add_option("--config", config_path)->required();
    fl_cmd->add_option("--size", size, "cubic input extent")->check(CLI::PositiveNumber);
    fl_cmd->add_option("--batch", batch, "batch size")->check(CLI::PositiveNumber);
    fl_cmd->add_option("--seed", seed, "override model.seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            TrainConfig cfg = TrainConfig::load(config_path);
            if (seed) cfg.seed = cfg.model.seed = *seed;
            TrainOptions opts;
            if (!resume.empty()) opts.resume = resume;
            opts.on_epoch = print_epoch;
            const TrainResult r = train(cfg, opts);
            std::cout << "checkpoint " << r.final_checkpoint << "\n";
            std::cout << "loss csv " << (fs::path(cfg.output_dir) / "loss.csv").string() << "\n";
        } else if (*eval_cmd) {
            const MetricsReport r = evaluate(checkpoint, manifest, out);
            std::cout << "cases " << r.cases.size() << "\n";
            for (int k = 0; k < 5; ++k)
                std::printf("%-5s dice %.4f +- %.4f  iou %.4f +- %.4f  hd95 %.4f +- %.4f\n", region_name(kRegions[k]),
                            r.dice[k].mean, r.dice[k].ci95, r.iou[k].mean, r.iou[k].ci95, r.hd95[k].mean,
                            r.hd95[k].ci95);
        } else if (*ph_cmd) {
            if (n_val > n_cases) throw Error("--val exceeds --n");
            Manifest m;
            const std::uint64_t base = seed.value_or(0);
            for (std::int64_t i = 0; i < n_cases; ++i) {
                char id[32];
                std::snprintf(id, sizeof id, "case%03lld", static_cast<long long>(i));
                const SampleVolume s = generate_phantom(base + static_cast<std::uint64_t>(i), {size, size, size}, id);
                m.entries.push_back(save_case(s, out, i >= n_cases - n_val ? "val" : "train"));
            }
            m.save((fs::path(out) / "manifest.csv").string());
            std::cout << "wrote " << n_cases << " cases to " << out << "\n";
        } else if (*fl_cmd) {
            TrainConfig cfg = TrainConfig::load(config_path);
            if (seed) cfg.model.seed = *seed;
            const NetworkGraph g = build_model(cfg.model);
            const FlopReport f = count_flops(g, {batch, cfg.model.in_channels, size, size, size});
            for (const auto& [name, n] : f.per_layer) std::printf("%-28s %16lld\n", name.c_str(), static_cast<long long>(n));
            std::printf("variant %s\nparams %lld\nflops %lld\n", variant_name(cfg.model.variant),
                        static_cast<long long>(count_params(g)), static_cast<long long>(f.total));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
