#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lineguard/errors.hpp"

namespace lineguard {

/// Dynamic Weight Averaging schedule parameters. Defaults: K=3, T=2.0,
/// 10 warm-up epochs.
struct DwaConfig {
    std::size_t num_tasks = 0;
    double k_norm = 3.0;
    double temperature = 2.0;
    std::size_t warmup_epochs = 10;
};

/// Per-task epoch loss series; epochs[t][i] is task i's loss at epoch t.
struct LossHistory {
    std::vector<std::string> task_ids;
    std::vector<std::vector<double>> epochs;

    std::size_t num_tasks() const { return task_ids.size(); }
    std::size_t num_epochs() const { return epochs.size(); }
};

/// Task weights at epoch t. During warm-up, or with fewer than two prior
/// epochs recorded, every task gets K/num_tasks; afterwards
///   r_i = L_i(t-2) / L_i(t-1),  w_i = K * exp(r_i/T) / sum_j exp(r_j/T).
/// Weights sum to K. Slower-learning tasks (larger r) get larger weight.
inline std::vector<double> dwa_weights(const LossHistory& history, std::size_t epoch,
                                       const DwaConfig& config) {
    if (config.num_tasks == 0) throw input_error("DWA config needs at least one task");
    if (history.num_tasks() != config.num_tasks)
        throw input_error("loss history has " + std::to_string(history.num_tasks()) +
                          " tasks, config expects " + std::to_string(config.num_tasks));
    if (!(config.temperature > 0.0)) throw input_error("DWA temperature must be positive");
    if (!(config.k_norm > 0.0)) throw input_error("DWA normalization constant must be positive");
    for (const auto& row : history.epochs)
        for (double loss : row)
            if (!(loss > 0.0))
                throw input_error("loss history contains a non-positive loss value");

    const std::size_t n = config.num_tasks;
    if (epoch < config.warmup_epochs || epoch < 2 || history.num_epochs() < epoch)
        return std::vector<double>(n, config.k_norm / static_cast<double>(n));

    const auto& prev = history.epochs[epoch - 1];
    const auto& prev2 = history.epochs[epoch - 2];
    if (prev.size() != n || prev2.size() != n)
        throw input_error("loss history rows must have one entry per task");

    std::vector<double> ratio(n);
    for (std::size_t i = 0; i < n; ++i) ratio[i] = prev2[i] / prev[i];
    // Softmax with max-shift; the shift cancels in the ratio.
    const double peak = *std::max_element(ratio.begin(), ratio.end());
    std::vector<double> weights(n);
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        weights[i] = std::exp((ratio[i] - peak) / config.temperature);
        denom += weights[i];
    }
    for (auto& w : weights) w = config.k_norm * w / denom;
    return weights;
}

}  // namespace lineguard
