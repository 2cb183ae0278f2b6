#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lineguard/errors.hpp"
#include "lineguard/scored_case.hpp"
#include "lineguard/taxonomy.hpp"

namespace lineguard {

enum class Outcome : std::uint8_t { Present = 1, Absent = 0 };

inline Outcome outcome_from_label(std::uint8_t y) {
    return y ? Outcome::Present : Outcome::Absent;
}

/// How poorly an outcome fits the reported probability: 1-p for Present,
/// p for Absent.
inline double nonconformity(double p, Outcome outcome) {
    if (!(p >= 0.0 && p <= 1.0))
        throw input_error("probability " + std::to_string(p) + " outside [0,1]");
    return outcome == Outcome::Present ? 1.0 - p : p;
}

/// Finite-sample conformal threshold: the rank_k-th smallest calibration
/// score, or +inf when rank_k exceeds n_cal.
struct ConformalThreshold {
    double q_hat = std::numeric_limits<double>::infinity();
    std::size_t n_cal = 0;
    std::size_t rank_k = 0;

    bool is_infinite() const { return std::isinf(q_hat); }
    bool operator==(const ConformalThreshold&) const = default;
};

/// Order-statistic index k = ceil((n+1)(1-alpha)), evaluated exactly over the
/// binary value of alpha via k = (n+1) - floor((n+1)*alpha). Plain double
/// evaluation misrounds near integer boundaries (e.g. n=9, alpha=0.1 must
/// give k=9, not 10).
inline std::size_t conformal_rank(std::size_t n_cal, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw input_error("alpha " + std::to_string(alpha) + " outside (0,1)");
    const std::uint64_t n_plus_1 = static_cast<std::uint64_t>(n_cal) + 1;
    int exponent = 0;
    const double frac = std::frexp(alpha, &exponent);  // alpha = frac * 2^exponent
    const auto mantissa = static_cast<unsigned __int128>(std::ldexp(frac, 53));
    const int shift = 53 - exponent;  // alpha = mantissa * 2^-shift exactly
    unsigned __int128 floor_na = 0;
    if (shift < 127)
        floor_na = (static_cast<unsigned __int128>(n_plus_1) * mantissa) >> shift;
    return static_cast<std::size_t>(n_plus_1 - static_cast<std::uint64_t>(floor_na));
}

/// Split-conformal quantile of a calibration score sample. Deterministic for
/// equal inputs regardless of input order.
inline ConformalThreshold conformal_quantile(std::span<const double> scores, double alpha) {
    if (scores.empty())
        throw calibration_error("cannot take a conformal quantile of an empty score list");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0))
            throw input_error("nonconformity score " + std::to_string(s) + " outside [0,1]");
    const std::size_t k = conformal_rank(scores.size(), alpha);
    ConformalThreshold t;
    t.n_cal = scores.size();
    t.rank_k = k;
    if (k > scores.size()) return t;  // q_hat stays +inf
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    t.q_hat = sorted[k - 1];
    return t;
}

enum class CalibrationMode { Independent, RiskSensitive };
enum class PoolingMode { GroupPooled, PerClass };

inline std::string_view to_token(CalibrationMode m) {
    return m == CalibrationMode::Independent ? "independent" : "risk_sensitive";
}
inline std::string_view to_token(PoolingMode p) {
    return p == PoolingMode::GroupPooled ? "group" : "per_class";
}

/// Present/Absent threshold pair that applies to one class at predict time.
struct ClassThresholds {
    ConformalThreshold present;
    ConformalThreshold absent;
    bool operator==(const ClassThresholds&) const = default;
};

/// Frozen calibration output. Independent mode stores one threshold per class
/// (used for both outcomes); risk-sensitive mode stores either the three
/// pooled thresholds or a per-class Mondrian table.
struct CalibrationModel {
    CalibrationMode mode = CalibrationMode::Independent;
    double alpha_standard = 0.1;
    double alpha_critical = 0.01;               // RiskSensitive only
    PoolingMode pooling = PoolingMode::GroupPooled;  // RiskSensitive only
    std::string taxonomy_fingerprint;

    std::vector<ConformalThreshold> independent;  // Independent: one per class
    ConformalThreshold crit_present;              // RiskSensitive / GroupPooled
    ConformalThreshold crit_absent;
    ConformalThreshold standard;
    std::vector<ClassThresholds> per_class;       // RiskSensitive / PerClass

    /// Resolves the (present, absent) thresholds governing class `i`.
    ClassThresholds thresholds_for(std::size_t i, const Taxonomy& taxonomy) const {
        if (mode == CalibrationMode::Independent) {
            const auto& q = independent.at(i);
            return {q, q};
        }
        if (pooling == PoolingMode::PerClass) return per_class.at(i);
        if (taxonomy.at(i).risk_group == RiskGroup::Critical)
            return {crit_present, crit_absent};
        return {standard, standard};
    }
};

/// Per-class subset of {Present, Absent}; sizes 0, 1 or 2.
struct ClassSet {
    bool contains_present = false;
    bool contains_absent = false;

    std::size_t cardinality() const {
        return static_cast<std::size_t>(contains_present) +
               static_cast<std::size_t>(contains_absent);
    }
    bool is_singleton_present() const { return contains_present && !contains_absent; }
    bool is_singleton_absent() const { return contains_absent && !contains_present; }
    bool empty() const { return !contains_present && !contains_absent; }
    bool contains(Outcome o) const {
        return o == Outcome::Present ? contains_present : contains_absent;
    }
    bool operator==(const ClassSet&) const = default;
};

struct PredictionSet {
    std::vector<ClassSet> per_class;
    bool operator==(const PredictionSet&) const = default;
};

namespace detail {

inline void require_calibration_input(std::span<const ScoredCase> cal,
                                      const Taxonomy& taxonomy) {
    if (cal.empty()) throw calibration_error("calibration set is empty");
    for (const auto& c : cal) {
        validate_case_width(c, taxonomy);
        require_labels(c);
    }
}

}  // namespace detail

/// Per-class calibration on the true outcome's score; the single threshold
/// q_hat_i gates both outcomes of class i.
inline CalibrationModel calibrate_independent(std::span<const ScoredCase> cal,
                                              const Taxonomy& taxonomy, double alpha) {
    detail::require_calibration_input(cal, taxonomy);
    CalibrationModel model;
    model.mode = CalibrationMode::Independent;
    model.alpha_standard = alpha;
    model.taxonomy_fingerprint = fingerprint(taxonomy);
    model.independent.reserve(taxonomy.size());
    std::vector<double> scores;
    scores.reserve(cal.size());
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        scores.clear();
        for (const auto& c : cal)
            scores.push_back(nonconformity(c.scores[i], outcome_from_label((*c.labels)[i])));
        model.independent.push_back(conformal_quantile(scores, alpha));
    }
    return model;
}

/// Label-conditional risk-sensitive calibration. GroupPooled pools strata
/// across classes of one risk group ("three distinct thresholds"); PerClass
/// stratifies per class with alpha chosen by (risk group, outcome).
inline CalibrationModel calibrate_risk_sensitive(std::span<const ScoredCase> cal,
                                                 const Taxonomy& taxonomy,
                                                 double alpha_standard,
                                                 double alpha_critical,
                                                 PoolingMode pooling = PoolingMode::GroupPooled) {
    if (!(alpha_critical < alpha_standard))
        throw input_error("alpha_critical must be strictly below alpha_standard");
    detail::require_calibration_input(cal, taxonomy);

    CalibrationModel model;
    model.mode = CalibrationMode::RiskSensitive;
    model.alpha_standard = alpha_standard;
    model.alpha_critical = alpha_critical;
    model.pooling = pooling;
    model.taxonomy_fingerprint = fingerprint(taxonomy);

    auto quantile_of = [](const std::vector<double>& scores, double alpha,
                          const std::string& stratum) {
        if (scores.empty())
            throw calibration_error("calibration stratum \"" + stratum +
                                    "\" has no examples");
        return conformal_quantile(scores, alpha);
    };

    if (pooling == PoolingMode::GroupPooled) {
        std::vector<double> crit_present, crit_absent, standard;
        for (const auto& c : cal) {
            for (std::size_t i = 0; i < taxonomy.size(); ++i) {
                const double p = c.scores[i];
                const Outcome truth = outcome_from_label((*c.labels)[i]);
                const double score = nonconformity(p, truth);
                if (taxonomy.at(i).risk_group == RiskGroup::Critical) {
                    (truth == Outcome::Present ? crit_present : crit_absent).push_back(score);
                } else {
                    standard.push_back(score);
                }
            }
        }
        model.crit_present = quantile_of(crit_present, alpha_critical, "critical/present");
        model.crit_absent = quantile_of(crit_absent, alpha_standard, "critical/absent");
        model.standard = quantile_of(standard, alpha_standard, "standard");
        return model;
    }

    model.per_class.reserve(taxonomy.size());
    std::vector<double> present, absent;
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        present.clear();
        absent.clear();
        for (const auto& c : cal) {
            if ((*c.labels)[i])
                present.push_back(nonconformity(c.scores[i], Outcome::Present));
            else
                absent.push_back(nonconformity(c.scores[i], Outcome::Absent));
        }
        const bool critical = taxonomy.at(i).risk_group == RiskGroup::Critical;
        const double alpha_present = critical ? alpha_critical : alpha_standard;
        ClassThresholds t;
        t.present = quantile_of(present, alpha_present, taxonomy.at(i).id + "/present");
        t.absent = quantile_of(absent, alpha_standard, taxonomy.at(i).id + "/absent");
        model.per_class.push_back(t);
    }
    return model;
}

/// Per class i: Present is in the set iff 1-p_i <= present threshold, Absent
/// iff p_i <= absent threshold. Scores equal to the threshold are included.
inline PredictionSet predict_sets(const CalibrationModel& model, const ScoredCase& scored,
                                  const Taxonomy& taxonomy) {
    if (model.taxonomy_fingerprint != fingerprint(taxonomy))
        throw validation_error("model fingerprint " + model.taxonomy_fingerprint +
                               " does not match taxonomy fingerprint " + fingerprint(taxonomy));
    if (model.mode == CalibrationMode::Independent && model.independent.size() != taxonomy.size())
        throw validation_error("model stores " + std::to_string(model.independent.size()) +
                               " class thresholds, taxonomy has " +
                               std::to_string(taxonomy.size()));
    if (model.mode == CalibrationMode::RiskSensitive && model.pooling == PoolingMode::PerClass &&
        model.per_class.size() != taxonomy.size())
        throw validation_error("model stores " + std::to_string(model.per_class.size()) +
                               " class thresholds, taxonomy has " +
                               std::to_string(taxonomy.size()));
    validate_case_width(scored, taxonomy);
    PredictionSet sets;
    sets.per_class.resize(taxonomy.size());
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        const double p = scored.scores[i];
        const ClassThresholds t = model.thresholds_for(i, taxonomy);
        sets.per_class[i].contains_present =
            nonconformity(p, Outcome::Present) <= t.present.q_hat;
        sets.per_class[i].contains_absent =
            nonconformity(p, Outcome::Absent) <= t.absent.q_hat;
    }
    return sets;
}

}  // namespace lineguard
