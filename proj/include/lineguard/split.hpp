#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lineguard/errors.hpp"
#include "lineguard/rng.hpp"
#include "lineguard/scored_case.hpp"

namespace lineguard {

/// Train / validation / test / calibration ratios plus the shuffle seed.
struct SplitSpec {
    std::array<double, 4> ratios{0.7, 0.1, 0.1, 0.1};
    std::uint64_t seed = 0;
};

inline constexpr std::array<const char*, 4> kSplitBucketNames{"train", "validation", "test",
                                                              "calibration"};

/// Patient-grouped split: patients are shuffled (seeded Fisher-Yates over
/// mt19937_64) and assigned greedily to the bucket with the largest case-count
/// deficit, so no patient ever spans two buckets.
inline std::array<std::vector<ScoredCase>, 4> grouped_split(std::span<const ScoredCase> cases,
                                                            const SplitSpec& spec) {
    if (cases.empty()) throw input_error("cannot split an empty case list");
    double sum = 0.0;
    for (double r : spec.ratios) {
        if (r < 0.0) throw input_error("split ratios must be non-negative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw input_error("split ratios must sum to 1 (got " + std::to_string(sum) + ")");

    // Patients in first-appearance order; a case without a patient_id is its
    // own singleton patient keyed by case_id. Distinct key prefixes keep the
    // two id spaces from colliding.
    std::vector<std::vector<std::size_t>> patients;
    std::unordered_map<std::string, std::size_t> patient_index;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string key = cases[i].patient_id.empty() ? "c:" + cases[i].case_id
                                                            : "p:" + cases[i].patient_id;
        auto [it, inserted] = patient_index.try_emplace(key, patients.size());
        if (inserted) patients.emplace_back();
        patients[it->second].push_back(i);
    }

    std::vector<std::size_t> order(patients.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 gen(spec.seed);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(detail::bounded_uniform(gen, order.size() - i));
        std::swap(order[i], order[j]);
    }

    std::array<std::vector<ScoredCase>, 4> buckets;
    std::array<std::size_t, 4> assigned{};
    const auto total = static_cast<double>(cases.size());
    for (const std::size_t p : order) {
        std::size_t best = 0;
        double best_deficit = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < 4; ++b) {
            const double deficit = spec.ratios[b] * total - static_cast<double>(assigned[b]);
            if (deficit > best_deficit) {
                best_deficit = deficit;
                best = b;
            }
        }
        for (const std::size_t i : patients[p]) buckets[best].push_back(cases[i]);
        assigned[best] += patients[p].size();
    }
    return buckets;
}

}  // namespace lineguard
