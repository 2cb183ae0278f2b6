#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lineguard/conformal.hpp"
#include "lineguard/errors.hpp"
#include "lineguard/scored_case.hpp"
#include "lineguard/taxonomy.hpp"

namespace lineguard {

/// Per-label coverage and set-size statistics over a labeled cohort.
struct CoverageReport {
    double overall_coverage = 0.0;
    std::vector<double> per_class_coverage;
    std::optional<double> critical_pair_coverage;     // all (case, critical-class) pairs
    std::optional<double> critical_present_coverage;  // critical pairs with true label 1
    double avg_set_size = 0.0;
    std::array<std::size_t, 3> size_histogram{};  // counts of set sizes 0/1/2
    std::size_t case_count = 0;
    std::size_t pair_count = 0;
};

struct CategorySafety {
    std::string category;
    std::size_t events = 0;          // (image, category) high-risk mispredictions
    std::size_t at_risk_images = 0;  // images with >=1 critical true-present in the category
    std::optional<double> rate;      // events / at_risk_images
};

/// Clinical-safety tallies over a labeled cohort.
struct SafetyReport {
    std::vector<CategorySafety> high_risk;  // one entry per tube category
    std::size_t high_risk_events_total = 0;
    std::optional<double> high_risk_rate_overall;  // total events / total at-risk opportunities
    std::size_t potential_miss_images = 0;
    std::size_t critical_condition_images = 0;
    std::optional<double> potential_miss_rate;  // denominator: critical_condition_images
    std::size_t case_count = 0;
};

namespace detail {

inline void require_verdict_input(std::span<const ScoredCase> cases,
                                  std::span<const PredictionSet> sets,
                                  const Taxonomy& taxonomy) {
    if (cases.size() != sets.size())
        throw input_error("case list and prediction-set list differ in length");
    if (cases.empty()) throw input_error("empty cohort");
    for (std::size_t n = 0; n < cases.size(); ++n) {
        validate_case_width(cases[n], taxonomy);
        require_labels(cases[n]);
        if (sets[n].per_class.size() != taxonomy.size())
            throw input_error("prediction set width mismatch for case \"" +
                              cases[n].case_id + "\"");
    }
}

}  // namespace detail

/// A (case, class) pair is covered iff the true outcome is in that class's
/// prediction set.
inline CoverageReport coverage(std::span<const ScoredCase> cases,
                               std::span<const PredictionSet> sets,
                               const Taxonomy& taxonomy) {
    detail::require_verdict_input(cases, sets, taxonomy);
    const std::size_t n_classes = taxonomy.size();
    CoverageReport rep;
    rep.case_count = cases.size();
    rep.pair_count = cases.size() * n_classes;
    std::vector<std::size_t> covered_per_class(n_classes, 0);
    std::size_t covered = 0, crit_pairs = 0, crit_covered = 0;
    std::size_t crit_present_pairs = 0, crit_present_covered = 0;
    std::size_t size_sum = 0;

    for (std::size_t n = 0; n < cases.size(); ++n) {
        const auto& labels = *cases[n].labels;
        for (std::size_t i = 0; i < n_classes; ++i) {
            const ClassSet& s = sets[n].per_class[i];
            const bool hit = s.contains(outcome_from_label(labels[i]));
            covered += hit;
            covered_per_class[i] += hit;
            rep.size_histogram[s.cardinality()]++;
            size_sum += s.cardinality();
            if (taxonomy.at(i).risk_group == RiskGroup::Critical) {
                crit_pairs++;
                crit_covered += hit;
                if (labels[i]) {
                    crit_present_pairs++;
                    crit_present_covered += hit;
                }
            }
        }
    }
    rep.overall_coverage = static_cast<double>(covered) / static_cast<double>(rep.pair_count);
    rep.per_class_coverage.resize(n_classes);
    for (std::size_t i = 0; i < n_classes; ++i)
        rep.per_class_coverage[i] =
            static_cast<double>(covered_per_class[i]) / static_cast<double>(cases.size());
    if (crit_pairs)
        rep.critical_pair_coverage =
            static_cast<double>(crit_covered) / static_cast<double>(crit_pairs);
    if (crit_present_pairs)
        rep.critical_present_coverage =
            static_cast<double>(crit_present_covered) / static_cast<double>(crit_present_pairs);
    rep.avg_set_size = static_cast<double>(size_sum) / static_cast<double>(rep.pair_count);
    return rep;
}

/// Per tube category: true iff (a) some critical class in the category is
/// truly present, (b) some normal class set in the category contains Present,
/// and (c) no critical class set in the category contains Present. Category
/// order follows Taxonomy::tube_categories().
inline std::vector<bool> high_risk_mispredictions(const ScoredCase& scored,
                                                  const PredictionSet& sets,
                                                  const Taxonomy& taxonomy) {
    validate_case_width(scored, taxonomy);
    require_labels(scored);
    if (sets.per_class.size() != taxonomy.size())
        throw input_error("prediction set width mismatch for case \"" + scored.case_id + "\"");
    const auto& labels = *scored.labels;
    std::vector<bool> flags;
    for (const auto& cat : taxonomy.tube_categories()) {
        bool critical_truly_present = false;
        bool normal_claims_present = false;
        bool any_critical_claims_present = false;
        for (auto i : taxonomy.category_members(cat)) {
            const ClassSet& s = sets.per_class[i];
            switch (taxonomy.at(i).risk_group) {
                case RiskGroup::Critical:
                    if (labels[i]) critical_truly_present = true;
                    if (s.contains_present) any_critical_claims_present = true;
                    break;
                case RiskGroup::Normal:
                    if (s.contains_present) normal_claims_present = true;
                    break;
                case RiskGroup::Other:
                    break;
            }
        }
        flags.push_back(critical_truly_present && normal_claims_present &&
                        !any_critical_claims_present);
    }
    return flags;
}

struct MissAnalysis {
    bool flagged = false;
    std::vector<std::size_t> offending_classes;  // taxonomy indices
};

/// True iff some critical class is truly present but its prediction set omits
/// Present (empty set or confident absence).
inline MissAnalysis potential_critical_miss(const ScoredCase& scored, const PredictionSet& sets,
                                            const Taxonomy& taxonomy) {
    validate_case_width(scored, taxonomy);
    require_labels(scored);
    if (sets.per_class.size() != taxonomy.size())
        throw input_error("prediction set width mismatch for case \"" + scored.case_id + "\"");
    MissAnalysis out;
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        if (taxonomy.at(i).risk_group != RiskGroup::Critical) continue;
        if ((*scored.labels)[i] && !sets.per_class[i].contains_present) {
            out.flagged = true;
            out.offending_classes.push_back(i);
        }
    }
    return out;
}

inline SafetyReport aggregate_safety(std::span<const ScoredCase> cases,
                                     std::span<const PredictionSet> sets,
                                     const Taxonomy& taxonomy) {
    detail::require_verdict_input(cases, sets, taxonomy);
    SafetyReport rep;
    rep.case_count = cases.size();
    const auto categories = taxonomy.tube_categories();
    rep.high_risk.resize(categories.size());
    for (std::size_t k = 0; k < categories.size(); ++k)
        rep.high_risk[k].category = categories[k];

    std::size_t at_risk_total = 0;
    for (std::size_t n = 0; n < cases.size(); ++n) {
        const auto flags = high_risk_mispredictions(cases[n], sets[n], taxonomy);
        const auto miss = potential_critical_miss(cases[n], sets[n], taxonomy);
        bool any_critical_present = false;
        for (std::size_t k = 0; k < categories.size(); ++k) {
            bool cat_critical_present = false;
            for (auto i : taxonomy.category_members(categories[k]))
                if (taxonomy.at(i).risk_group == RiskGroup::Critical && (*cases[n].labels)[i])
                    cat_critical_present = true;
            if (cat_critical_present) {
                rep.high_risk[k].at_risk_images++;
                any_critical_present = true;
            }
            if (flags[k]) {
                rep.high_risk[k].events++;
                rep.high_risk_events_total++;
            }
        }
        if (any_critical_present) rep.critical_condition_images++;
        if (miss.flagged) rep.potential_miss_images++;
    }
    for (auto& cat : rep.high_risk) {
        at_risk_total += cat.at_risk_images;
        if (cat.at_risk_images)
            cat.rate = static_cast<double>(cat.events) / static_cast<double>(cat.at_risk_images);
    }
    if (at_risk_total)
        rep.high_risk_rate_overall = static_cast<double>(rep.high_risk_events_total) /
                                     static_cast<double>(at_risk_total);
    if (rep.critical_condition_images)
        rep.potential_miss_rate = static_cast<double>(rep.potential_miss_images) /
                                  static_cast<double>(rep.critical_condition_images);
    return rep;
}

}  // namespace lineguard
