#include "ukan/optim.hpp"

#include <algorithm>
#include <cmath>

namespace ukan {

void ScheduleConfig::validate() const {
    if (epochs < 1) throw Error("schedule: epochs must be positive");
    if (warmup_epochs < 0 || warmup_epochs >= epochs) throw Error("schedule: need 0 <= warmup_epochs < epochs");
    if (!(lr_start > 0 && lr_peak > 0)) throw Error("schedule: learning rates must be positive");
}

double lr_schedule(std::int64_t epoch, const ScheduleConfig& cfg) {
    cfg.validate();
    if (epoch < 0 || epoch > cfg.epochs)
        throw Error("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + "]");
    if (epoch < cfg.warmup_epochs)
        return cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * static_cast<double>(epoch) /
                                  static_cast<double>(cfg.warmup_epochs);
    if (epoch == cfg.epochs) return 0.0;
    const double t = static_cast<double>(epoch - cfg.warmup_epochs) / static_cast<double>(cfg.epochs - cfg.warmup_epochs);
    return cfg.lr_peak * (1.0 + std::cos(M_PI * t)) / 2.0;
}

void adamw_step(ParameterStore& params, const GradientMap& grads, AdamState& state, double lr,
                const AdamConfig& cfg) {
    std::vector<std::pair<std::string, Tensor*>> order;
    for (const auto& [name, t] : params.entries()) order.emplace_back(name, params.find(name));
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [name, p] : order)
        if (!grads.contains(*p)) throw AutogradError("adamw_step: no gradient for parameter '" + name + "'");

    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const auto& [name, p] : order) {
        const std::vector<double> g = grads.at(*p).to_vector();
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) {
            m.assign(g.size(), 0.0);
            v.assign(g.size(), 0.0);
        }
        if (m.size() != g.size()) throw ShapeError("adamw_step: optimizer state shape mismatch for '" + name + "'");
        dispatch(p->dtype(), [&]<class T>(T) {
            auto w = p->mutable_data<T>();
            for (std::size_t i = 0; i < g.size(); ++i) {
                double x = static_cast<double>(w[i]);
                x -= lr * cfg.weight_decay * x;
                m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
                x -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
                w[i] = static_cast<T>(x);
            }
        });
    }
}

}  // namespace ukan
