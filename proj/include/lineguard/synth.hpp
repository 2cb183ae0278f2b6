#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lineguard/errors.hpp"
#include "lineguard/rng.hpp"
#include "lineguard/scored_case.hpp"
#include "lineguard/taxonomy.hpp"

namespace lineguard {

/// Per-class generator knobs. The latent true probability is a two-component
/// triangular mixture: an absent-leaning component on [0, spread] and a
/// present-leaning component on [1-spread, 1], mixed so the latent mean is
/// exactly `prevalence`. `tau` applies a monotone temperature distortion to
/// the reported score (tau=1 reports the latent unchanged).
struct ClassSynthParams {
    double prevalence = 0.2;
    double spread = 0.2;
    double tau = 1.0;
};

struct CasesPerPatient {
    std::size_t min = 1;
    std::size_t max = 1;
};

struct SynthConfig {
    std::size_t cohort_size = 0;
    std::uint64_t seed = 0;
    CasesPerPatient cases_per_patient;
    std::vector<ClassSynthParams> per_class;  // one entry per taxonomy class
};

struct SynthResult {
    std::vector<ScoredCase> cases;
    std::vector<std::vector<double>> latents;  // latents[case][class]
};

namespace detail {

inline void validate_synth_params(const ClassSynthParams& p, const std::string& class_id) {
    if (!(p.prevalence >= 0.0 && p.prevalence <= 1.0))
        throw input_error("class \"" + class_id + "\": prevalence outside [0,1]");
    if (!(p.spread > 0.0 && p.spread < 1.0))
        throw input_error("class \"" + class_id + "\": spread must lie in (0,1)");
    if (!(p.tau > 0.0)) throw input_error("class \"" + class_id + "\": tau must be positive");
    const bool degenerate = p.prevalence == 0.0 || p.prevalence == 1.0;
    if (!degenerate &&
        (p.prevalence < p.spread / 2.0 || p.prevalence > 1.0 - p.spread / 2.0))
        throw input_error("class \"" + class_id +
                          "\": prevalence must lie in [spread/2, 1-spread/2] (or be 0/1)");
}

inline double distort_score(double latent, double tau) {
    if (tau == 1.0 || latent == 0.0 || latent == 1.0) return latent;
    const double a = std::pow(latent, 1.0 / tau);
    const double b = std::pow(1.0 - latent, 1.0 / tau);
    return a / (a + b);
}

}  // namespace detail

inline void validate_synth_config(const SynthConfig& config, const Taxonomy& taxonomy) {
    if (config.cohort_size < 1) throw input_error("cohort_size must be at least 1");
    if (config.cases_per_patient.min < 1 ||
        config.cases_per_patient.min > config.cases_per_patient.max)
        throw input_error("cases_per_patient needs 1 <= min <= max");
    if (config.per_class.size() != taxonomy.size())
        throw input_error("synth config has " + std::to_string(config.per_class.size()) +
                          " class entries, taxonomy has " + std::to_string(taxonomy.size()));
    for (std::size_t i = 0; i < taxonomy.size(); ++i)
        detail::validate_synth_params(config.per_class[i], taxonomy.at(i).id);
}

/// Deterministic labeled cohort with known ground truth. The draw stream is
/// fixed: mt19937_64(seed); one size draw per patient when min<max, then per
/// case and class (canonical order) exactly four unit uniforms: component
/// pick, two triangular draws, label draw. Labels are Bernoulli(latent), so
/// calibration/test slices of one cohort are exchangeable by construction.
inline SynthResult synth_generate_with_latents(const SynthConfig& config,
                                               const Taxonomy& taxonomy) {
    validate_synth_config(config, taxonomy);
    std::mt19937_64 gen(config.seed);
    SynthResult result;
    result.cases.reserve(config.cohort_size);
    result.latents.reserve(config.cohort_size);

    std::size_t generated = 0, patient = 0;
    char idbuf[32];
    while (generated < config.cohort_size) {
        std::size_t patient_cases = config.cases_per_patient.min;
        if (config.cases_per_patient.max > config.cases_per_patient.min) {
            const std::uint64_t span =
                config.cases_per_patient.max - config.cases_per_patient.min + 1;
            patient_cases += static_cast<std::size_t>(detail::bounded_uniform(gen, span));
        }
        if (patient_cases > config.cohort_size - generated)
            patient_cases = config.cohort_size - generated;
        std::snprintf(idbuf, sizeof idbuf, "pat_%06zu", patient);
        const std::string patient_id = idbuf;

        for (std::size_t k = 0; k < patient_cases; ++k, ++generated) {
            ScoredCase c;
            std::snprintf(idbuf, sizeof idbuf, "case_%07zu", generated);
            c.case_id = idbuf;
            c.patient_id = patient_id;
            c.scores.resize(taxonomy.size());
            std::vector<std::uint8_t> labels(taxonomy.size());
            std::vector<double> latents(taxonomy.size());
            for (std::size_t i = 0; i < taxonomy.size(); ++i) {
                const auto& p = config.per_class[i];
                const double u_component = detail::unit_uniform(gen);
                const double u_a = detail::unit_uniform(gen);
                const double u_b = detail::unit_uniform(gen);
                const double u_label = detail::unit_uniform(gen);
                double latent;
                if (p.prevalence == 0.0 || p.prevalence == 1.0) {
                    latent = p.prevalence;
                } else {
                    const double lambda =
                        (p.prevalence - p.spread / 2.0) / (1.0 - p.spread);
                    const double tri = p.spread * (u_a + u_b) / 2.0;  // triangular on [0,spread]
                    latent = u_component < lambda ? (1.0 - p.spread) + tri : tri;
                }
                latents[i] = latent;
                labels[i] = u_label < latent ? 1 : 0;
                c.scores[i] = detail::distort_score(latent, p.tau);
            }
            c.labels = std::move(labels);
            result.cases.push_back(std::move(c));
            result.latents.push_back(std::move(latents));
        }
        ++patient;
    }
    return result;
}

inline std::vector<ScoredCase> synth_generate(const SynthConfig& config,
                                              const Taxonomy& taxonomy) {
    return synth_generate_with_latents(config, taxonomy).cases;
}

/// Synth config JSON: {"cohort_size", "seed", "cases_per_patient": {"min","max"},
/// "default": {...}, "per_class": {"<class_id>": {...}}}. Per-class entries
/// override the default parameter block.
inline SynthConfig parse_synth_config(std::string_view text, const Taxonomy& taxonomy) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("synth config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("cohort_size"))
        throw input_error("synth config must be an object with cohort_size");

    SynthConfig config;
    config.cohort_size = doc["cohort_size"].get<std::size_t>();
    config.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("cases_per_patient")) {
        const auto& cpp = doc["cases_per_patient"];
        config.cases_per_patient.min = cpp.value("min", std::size_t{1});
        config.cases_per_patient.max = cpp.value("max", config.cases_per_patient.min);
    }
    auto apply = [](ClassSynthParams base, const nlohmann::json& j) {
        if (j.contains("prevalence")) base.prevalence = j["prevalence"].get<double>();
        if (j.contains("spread")) base.spread = j["spread"].get<double>();
        if (j.contains("tau")) base.tau = j["tau"].get<double>();
        return base;
    };
    ClassSynthParams defaults;
    if (doc.contains("default")) defaults = apply(defaults, doc["default"]);
    config.per_class.assign(taxonomy.size(), defaults);
    if (doc.contains("per_class")) {
        if (!doc["per_class"].is_object())
            throw input_error("synth per_class must map class ids to parameter objects");
        for (const auto& [id, params] : doc["per_class"].items()) {
            const auto idx = taxonomy.index_of(id);
            if (!idx)
                throw input_error("synth per_class names unknown class \"" + id + "\"");
            config.per_class[*idx] = apply(defaults, params);
        }
    }
    validate_synth_config(config, taxonomy);
    return config;
}

}  // namespace lineguard
