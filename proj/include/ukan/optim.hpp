#pragma once

#include <map>
#include <string>
#include <vector>

#include "ukan/params.hpp"
#include "ukan/tensor.hpp"

namespace ukan {

struct ScheduleConfig {
    std::int64_t epochs = 50;
    std::int64_t warmup_epochs = 30;
    double lr_start = 0.005;
    double lr_peak = 0.01;

    void validate() const;
};

// Linear warmup lr_start -> lr_peak over warmup_epochs, then cosine decay
// from lr_peak to 0 at `epochs`. Defined for 0 <= epoch <= epochs.
double lr_schedule(std::int64_t epoch, const ScheduleConfig& cfg);

struct AdamConfig {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 1e-4;
};

struct AdamState {
    std::int64_t step = 0;
    std::map<std::string, std::vector<double>> m, v;
};

// One AdamW update of every parameter in name order. Weight decay is
// decoupled: p -= lr * wd * p, then the bias-corrected Adam step.
void adamw_step(ParameterStore& params, const GradientMap& grads, AdamState& state, double lr,
                const AdamConfig& cfg);

}  // namespace ukan
