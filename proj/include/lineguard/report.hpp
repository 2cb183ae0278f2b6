#pragma once

#include <array>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lineguard/conformal.hpp"
#include "lineguard/metrics.hpp"
#include "lineguard/scored_case.hpp"
#include "lineguard/taxonomy.hpp"
#include "lineguard/triage.hpp"

namespace lineguard {

/// Rate rendering for the text tables: one decimal place, e.g. "0.8%".
inline std::string percent_1dp(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
    return buf;
}

/// Coverage, safety and triage distribution for one labeled cohort.
struct EvaluationReport {
    CoverageReport coverage;
    SafetyReport safety;
    std::array<std::size_t, kTriageCategoryCount> triage_counts{};
    std::size_t fully_confident_count = 0;
    std::size_t case_count = 0;
};

inline EvaluationReport evaluate_cohort(std::span<const ScoredCase> cases,
                                        std::span<const PredictionSet> sets,
                                        const Taxonomy& taxonomy) {
    EvaluationReport rep;
    rep.coverage = coverage(cases, sets, taxonomy);
    rep.safety = aggregate_safety(cases, sets, taxonomy);
    rep.case_count = cases.size();
    for (const auto& s : sets) {
        rep.triage_counts[static_cast<std::size_t>(categorize(s, taxonomy))]++;
        if (fully_confident(s)) rep.fully_confident_count++;
    }
    return rep;
}

namespace detail {

inline nlohmann::ordered_json json_rate(const std::optional<double>& rate) {
    if (!rate) return nullptr;  // undefined marker, never silently 0
    return *rate;
}

}  // namespace detail

inline std::string report_to_json(const EvaluationReport& rep, const Taxonomy& taxonomy) {
    nlohmann::ordered_json doc;
    doc["version"] = "1";
    doc["cohort"] = {{"cases", rep.case_count}, {"classes", taxonomy.size()}};

    nlohmann::ordered_json cov;
    cov["overall"] = rep.coverage.overall_coverage;
    nlohmann::ordered_json per_class;
    for (std::size_t i = 0; i < taxonomy.size(); ++i)
        per_class[taxonomy.at(i).id] = rep.coverage.per_class_coverage[i];
    cov["per_class"] = std::move(per_class);
    cov["critical_pairs"] = detail::json_rate(rep.coverage.critical_pair_coverage);
    cov["critical_present"] = detail::json_rate(rep.coverage.critical_present_coverage);
    cov["avg_set_size"] = rep.coverage.avg_set_size;
    cov["size_histogram"] = {{"empty", rep.coverage.size_histogram[0]},
                             {"single", rep.coverage.size_histogram[1]},
                             {"double", rep.coverage.size_histogram[2]}};
    doc["coverage"] = std::move(cov);

    nlohmann::ordered_json safety;
    nlohmann::ordered_json per_category;
    for (const auto& cat : rep.safety.high_risk)
        per_category[cat.category] = {{"events", cat.events},
                                      {"at_risk_images", cat.at_risk_images},
                                      {"rate", detail::json_rate(cat.rate)}};
    safety["high_risk"] = {{"per_category", std::move(per_category)},
                           {"total_events", rep.safety.high_risk_events_total},
                           {"overall_rate", detail::json_rate(rep.safety.high_risk_rate_overall)}};
    safety["potential_miss"] = {
        {"images", rep.safety.potential_miss_images},
        {"critical_condition_images", rep.safety.critical_condition_images},
        {"rate", detail::json_rate(rep.safety.potential_miss_rate)}};
    doc["safety"] = std::move(safety);

    nlohmann::ordered_json triage;
    nlohmann::ordered_json counts, rates;
    for (std::size_t k = 0; k < kTriageCategoryCount; ++k) {
        const auto token = std::string(to_token(static_cast<TriageCategory>(k)));
        counts[token] = rep.triage_counts[k];
        rates[token] =
            static_cast<double>(rep.triage_counts[k]) / static_cast<double>(rep.case_count);
    }
    triage["counts"] = std::move(counts);
    triage["rates"] = std::move(rates);
    triage["fully_confident"] = {
        {"count", rep.fully_confident_count},
        {"rate", static_cast<double>(rep.fully_confident_count) /
                     static_cast<double>(rep.case_count)}};
    doc["triage"] = std::move(triage);
    return doc.dump(2) + "\n";
}

/// Aligned plain-text table; rates carry one decimal place.
inline std::string report_to_text(const EvaluationReport& rep, const Taxonomy& taxonomy) {
    std::string out;
    char buf[160];
    auto line = [&](const std::string& label, const std::string& value) {
        std::snprintf(buf, sizeof buf, "%-34s %s\n", label.c_str(), value.c_str());
        out += buf;
    };
    auto rate_text = [](const std::optional<double>& r) {
        return r ? percent_1dp(*r) : std::string("undefined");
    };

    line("Cohort", std::to_string(rep.case_count) + " cases x " +
                       std::to_string(taxonomy.size()) + " classes");
    line("Overall coverage", percent_1dp(rep.coverage.overall_coverage));
    line("Critical pair coverage", rate_text(rep.coverage.critical_pair_coverage));
    line("Critical present coverage", rate_text(rep.coverage.critical_present_coverage));
    std::snprintf(buf, sizeof buf, "%.2f", rep.coverage.avg_set_size);
    line("Average set size", buf);
    const auto& h = rep.coverage.size_histogram;
    const auto pairs = static_cast<double>(rep.coverage.pair_count);
    line("Set sizes 0 / 1 / 2",
         percent_1dp(static_cast<double>(h[0]) / pairs) + " / " +
             percent_1dp(static_cast<double>(h[1]) / pairs) + " / " +
             percent_1dp(static_cast<double>(h[2]) / pairs));
    out += "\n";
    for (std::size_t i = 0; i < taxonomy.size(); ++i)
        line("Coverage " + taxonomy.at(i).id, percent_1dp(rep.coverage.per_class_coverage[i]));
    out += "\n";
    for (const auto& cat : rep.safety.high_risk)
        line("High-risk mispredictions " + cat.category,
             std::to_string(cat.events) + " / " + std::to_string(cat.at_risk_images) +
                 " at-risk (" + rate_text(cat.rate) + ")");
    line("Potential critical miss",
         std::to_string(rep.safety.potential_miss_images) + " / " +
             std::to_string(rep.safety.critical_condition_images) + " (" +
             rate_text(rep.safety.potential_miss_rate) + ")");
    out += "\n";
    for (std::size_t k = 0; k < kTriageCategoryCount; ++k) {
        const auto token = std::string(to_token(static_cast<TriageCategory>(k)));
        const double rate =
            static_cast<double>(rep.triage_counts[k]) / static_cast<double>(rep.case_count);
        line("Triage " + token,
             std::to_string(rep.triage_counts[k]) + " (" + percent_1dp(rate) + ")");
    }
    line("Fully confident",
         std::to_string(rep.fully_confident_count) + " (" +
             percent_1dp(static_cast<double>(rep.fully_confident_count) /
                         static_cast<double>(rep.case_count)) +
             ")");
    return out;
}

/// Workload table; the extrapolated counts are the integers clinicians plan
/// around.
inline std::string workload_to_text(const WorkloadReport& rep) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "Cohort of %zu cases extrapolated to %llu per day\n",
                  rep.cohort_size, static_cast<unsigned long long>(rep.daily_volume));
    out += buf;
    for (std::size_t k = 0; k < kTriageCategoryCount; ++k) {
        const auto token = std::string(to_token(static_cast<TriageCategory>(k)));
        std::snprintf(buf, sizeof buf, "%-24s %6zu (%s)  -> %lld per day\n", token.c_str(),
                      rep.counts[k], percent_1dp(rep.rates[k]).c_str(), rep.extrapolated[k]);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-24s %6zu (%s)  -> %lld per day\n", "fully_confident",
                  rep.fully_confident_count, percent_1dp(rep.fully_confident_rate).c_str(),
                  rep.fully_confident_daily);
    out += buf;
    if (rep.potential_miss_rate) {
        std::snprintf(buf, sizeof buf, "%-24s %s of critical-condition images -> %lld per day\n",
                      "potential_miss", percent_1dp(*rep.potential_miss_rate).c_str(),
                      *rep.potential_miss_daily);
        out += buf;
    }
    return out;
}

inline std::string workload_to_json(const WorkloadReport& rep) {
    nlohmann::ordered_json doc;
    doc["version"] = "1";
    doc["cohort_size"] = rep.cohort_size;
    doc["daily_volume"] = rep.daily_volume;
    nlohmann::ordered_json cats;
    for (std::size_t k = 0; k < kTriageCategoryCount; ++k) {
        const auto token = std::string(to_token(static_cast<TriageCategory>(k)));
        cats[token] = {{"count", rep.counts[k]},
                       {"rate", rep.rates[k]},
                       {"daily_exact", rep.extrapolated_exact[k]},
                       {"daily", rep.extrapolated[k]}};
    }
    doc["categories"] = std::move(cats);
    doc["fully_confident"] = {{"count", rep.fully_confident_count},
                              {"rate", rep.fully_confident_rate},
                              {"daily", rep.fully_confident_daily}};
    if (rep.potential_miss_rate) {
        doc["potential_miss"] = {{"rate", *rep.potential_miss_rate},
                                 {"daily", *rep.potential_miss_daily}};
    } else {
        doc["potential_miss"] = nullptr;
    }
    return doc.dump(2) + "\n";
}

}  // namespace lineguard
