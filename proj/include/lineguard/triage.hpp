#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lineguard/conformal.hpp"
#include "lineguard/errors.hpp"
#include "lineguard/metrics.hpp"
#include "lineguard/scored_case.hpp"
#include "lineguard/taxonomy.hpp"

namespace lineguard {

enum class TriageCategory : std::uint8_t {
    AutoNormal = 0,
    ImmediateIntervention = 1,
    SpecialistReview = 2,
    RescanNeeded = 3,
};

inline constexpr std::size_t kTriageCategoryCount = 4;

inline std::string_view to_token(TriageCategory c) {
    switch (c) {
        case TriageCategory::AutoNormal: return "auto_normal";
        case TriageCategory::ImmediateIntervention: return "immediate_intervention";
        case TriageCategory::SpecialistReview: return "specialist_review";
        case TriageCategory::RescanNeeded: return "rescan_needed";
    }
    return "specialist_review";
}

inline TriageCategory triage_from_token(std::string_view token) {
    if (token == "auto_normal") return TriageCategory::AutoNormal;
    if (token == "immediate_intervention") return TriageCategory::ImmediateIntervention;
    if (token == "specialist_review") return TriageCategory::SpecialistReview;
    if (token == "rescan_needed") return TriageCategory::RescanNeeded;
    throw input_error("unknown triage category token: \"" + std::string(token) + "\"");
}

/// Per-image routing decision, evaluated with fixed precedence:
///   1. ImmediateIntervention - some critical class set is exactly {Present}
///   2. RescanNeeded         - some critical class set is empty
///   3. AutoNormal           - every critical set is {Absent} and every
///                             normal set is {Present}
///   4. SpecialistReview     - everything else
/// Other-group classes never gate the first three rules.
inline TriageCategory categorize(const PredictionSet& sets, const Taxonomy& taxonomy) {
    if (sets.per_class.size() != taxonomy.size())
        throw input_error("prediction set width does not match taxonomy");
    bool critical_confident_present = false;
    bool critical_empty = false;
    bool all_critical_absent = true;
    bool all_normal_present = true;
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        const ClassSet& s = sets.per_class[i];
        switch (taxonomy.at(i).risk_group) {
            case RiskGroup::Critical:
                if (s.is_singleton_present()) critical_confident_present = true;
                if (s.empty()) critical_empty = true;
                if (!s.is_singleton_absent()) all_critical_absent = false;
                break;
            case RiskGroup::Normal:
                if (!s.is_singleton_present()) all_normal_present = false;
                break;
            case RiskGroup::Other:
                break;
        }
    }
    if (critical_confident_present) return TriageCategory::ImmediateIntervention;
    if (critical_empty) return TriageCategory::RescanNeeded;
    if (all_critical_absent && all_normal_present) return TriageCategory::AutoNormal;
    return TriageCategory::SpecialistReview;
}

/// True iff every class has a definitive (singleton) prediction.
inline bool fully_confident(const PredictionSet& sets) {
    for (const auto& s : sets.per_class)
        if (s.cardinality() != 1) return false;
    return true;
}

/// Per-case verdict: prediction sets plus routing; safety flags are filled
/// only when the case carried labels.
struct CaseVerdict {
    std::string case_id;
    PredictionSet sets;
    TriageCategory triage = TriageCategory::SpecialistReview;
    bool confident = false;
    std::optional<bool> potential_miss;
    std::optional<bool> high_risk;           // any tube category flagged
    std::optional<bool> critical_condition;  // >=1 critical class truly present
};

inline CaseVerdict make_verdict(const ScoredCase& scored, const PredictionSet& sets,
                                const Taxonomy& taxonomy) {
    CaseVerdict v;
    v.case_id = scored.case_id;
    v.sets = sets;
    v.triage = categorize(sets, taxonomy);
    v.confident = fully_confident(sets);
    if (scored.has_labels()) {
        v.potential_miss = potential_critical_miss(scored, sets, taxonomy).flagged;
        const auto flags = high_risk_mispredictions(scored, sets, taxonomy);
        bool any = false;
        for (bool f : flags) any = any || f;
        v.high_risk = any;
        bool crit = false;
        for (std::size_t i = 0; i < taxonomy.size(); ++i)
            if (taxonomy.at(i).risk_group == RiskGroup::Critical && (*scored.labels)[i])
                crit = true;
        v.critical_condition = crit;
    }
    return v;
}

/// Cohort category rates extrapolated to a stated daily volume.
struct WorkloadReport {
    std::size_t cohort_size = 0;
    std::uint64_t daily_volume = 0;
    std::array<std::size_t, kTriageCategoryCount> counts{};
    std::array<double, kTriageCategoryCount> rates{};
    std::array<double, kTriageCategoryCount> extrapolated_exact{};
    std::array<long long, kTriageCategoryCount> extrapolated{};  // rounded half away from zero
    std::size_t fully_confident_count = 0;
    double fully_confident_rate = 0.0;
    long long fully_confident_daily = 0;
    std::optional<double> potential_miss_rate;  // over critical-condition images
    std::optional<long long> potential_miss_daily;
};

inline WorkloadReport workload(std::span<const CaseVerdict> cohort, std::uint64_t daily_volume) {
    if (cohort.empty()) throw input_error("workload needs a non-empty cohort");
    if (daily_volume < 1) throw input_error("daily volume must be at least 1");
    WorkloadReport rep;
    rep.cohort_size = cohort.size();
    rep.daily_volume = daily_volume;
    std::size_t miss_images = 0, crit_images = 0, labeled = 0;
    for (const auto& v : cohort) {
        rep.counts[static_cast<std::size_t>(v.triage)]++;
        if (v.confident) rep.fully_confident_count++;
        if (v.potential_miss.has_value()) {
            labeled++;
            if (*v.potential_miss) miss_images++;
            if (v.critical_condition.value_or(false)) crit_images++;
        }
    }
    const auto volume = static_cast<double>(daily_volume);
    for (std::size_t k = 0; k < kTriageCategoryCount; ++k) {
        rep.rates[k] = static_cast<double>(rep.counts[k]) / static_cast<double>(rep.cohort_size);
        rep.extrapolated_exact[k] = rep.rates[k] * volume;
        rep.extrapolated[k] = std::llround(rep.extrapolated_exact[k]);
    }
    rep.fully_confident_rate =
        static_cast<double>(rep.fully_confident_count) / static_cast<double>(rep.cohort_size);
    rep.fully_confident_daily = std::llround(rep.fully_confident_rate * volume);
    if (labeled && crit_images) {
        rep.potential_miss_rate =
            static_cast<double>(miss_images) / static_cast<double>(crit_images);
        rep.potential_miss_daily = std::llround(*rep.potential_miss_rate * volume);
    }
    return rep;
}

}  // namespace lineguard
