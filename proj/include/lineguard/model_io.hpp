#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lineguard/conformal.hpp"
#include "lineguard/errors.hpp"
#include "lineguard/taxonomy.hpp"

namespace lineguard {

namespace detail {

// %.17g keeps the exact double across a write/read round trip and satisfies
// the >= 15 significant digit contract for threshold values.
inline std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string threshold_json(const ConformalThreshold& t) {
    std::string q = t.is_infinite() ? "\"inf\"" : full_precision(t.q_hat);
    return "{\"q_hat\": " + q + ", \"n_cal\": " + std::to_string(t.n_cal) +
           ", \"rank_k\": " + std::to_string(t.rank_k) + "}";
}

inline ConformalThreshold parse_threshold(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("q_hat") || !j.contains("n_cal") || !j.contains("rank_k"))
        throw input_error("model threshold entries need q_hat, n_cal and rank_k");
    ConformalThreshold t;
    t.n_cal = j["n_cal"].get<std::size_t>();
    t.rank_k = j["rank_k"].get<std::size_t>();
    if (j["q_hat"].is_string()) {
        if (j["q_hat"].get<std::string>() != "inf")
            throw input_error("threshold q_hat string must be \"inf\"");
        if (t.rank_k <= t.n_cal)
            throw input_error("infinite q_hat requires rank_k > n_cal");
    } else {
        t.q_hat = j["q_hat"].get<double>();
        if (!(t.q_hat >= 0.0 && t.q_hat <= 1.0))
            throw input_error("finite q_hat must lie in [0,1]");
        if (t.rank_k > t.n_cal)
            throw input_error("finite q_hat requires rank_k <= n_cal");
    }
    return t;
}

}  // namespace detail

/// Model file writer. Hand-assembled JSON so threshold values keep full
/// decimal precision; Infinite encodes as the string "inf".
inline std::string serialize_model(const CalibrationModel& model, const Taxonomy& taxonomy) {
    std::string out = "{\n";
    out += "  \"version\": \"1\",\n";
    out += "  \"mode\": \"" + std::string(to_token(model.mode)) + "\",\n";
    out += "  \"alpha_standard\": " + detail::full_precision(model.alpha_standard) + ",\n";
    if (model.mode == CalibrationMode::RiskSensitive) {
        out += "  \"alpha_critical\": " + detail::full_precision(model.alpha_critical) + ",\n";
        out += "  \"pooling\": \"" + std::string(to_token(model.pooling)) + "\",\n";
    }
    out += "  \"taxonomy_fingerprint\": \"" + model.taxonomy_fingerprint + "\",\n";
    out += "  \"thresholds\": {\n";
    if (model.mode == CalibrationMode::Independent) {
        out += "    \"per_class\": [\n";
        for (std::size_t i = 0; i < model.independent.size(); ++i) {
            out += "      {\"class_id\": \"" + taxonomy.at(i).id +
                   "\", \"q\": " + detail::threshold_json(model.independent[i]) + "}";
            out += (i + 1 < model.independent.size()) ? ",\n" : "\n";
        }
        out += "    ]\n";
    } else if (model.pooling == PoolingMode::GroupPooled) {
        out += "    \"crit_present\": " + detail::threshold_json(model.crit_present) + ",\n";
        out += "    \"crit_absent\": " + detail::threshold_json(model.crit_absent) + ",\n";
        out += "    \"standard\": " + detail::threshold_json(model.standard) + "\n";
    } else {
        out += "    \"per_class\": [\n";
        for (std::size_t i = 0; i < model.per_class.size(); ++i) {
            out += "      {\"class_id\": \"" + taxonomy.at(i).id +
                   "\", \"present\": " + detail::threshold_json(model.per_class[i].present) +
                   ", \"absent\": " + detail::threshold_json(model.per_class[i].absent) + "}";
            out += (i + 1 < model.per_class.size()) ? ",\n" : "\n";
        }
        out += "    ]\n";
    }
    out += "  }\n}\n";
    return out;
}

inline CalibrationModel parse_model(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("model file is not valid JSON: ") + e.what());
    }
    for (const char* key : {"mode", "alpha_standard", "taxonomy_fingerprint", "thresholds"})
        if (!doc.contains(key))
            throw input_error(std::string("model file missing field \"") + key + "\"");

    CalibrationModel model;
    model.alpha_standard = doc["alpha_standard"].get<double>();
    if (!(model.alpha_standard > 0.0 && model.alpha_standard < 1.0))
        throw input_error("model alpha_standard must lie in (0,1)");
    model.taxonomy_fingerprint = doc["taxonomy_fingerprint"].get<std::string>();
    const std::string mode = doc["mode"].get<std::string>();
    const auto& thr = doc["thresholds"];
    if (mode == "independent") {
        model.mode = CalibrationMode::Independent;
        if (!thr.contains("per_class") || !thr["per_class"].is_array())
            throw input_error("independent model needs thresholds.per_class");
        for (const auto& e : thr["per_class"])
            model.independent.push_back(detail::parse_threshold(e.at("q")));
    } else if (mode == "risk_sensitive") {
        model.mode = CalibrationMode::RiskSensitive;
        if (!doc.contains("alpha_critical") || !doc.contains("pooling"))
            throw input_error("risk_sensitive model needs alpha_critical and pooling");
        model.alpha_critical = doc["alpha_critical"].get<double>();
        if (!(model.alpha_critical > 0.0 && model.alpha_critical < model.alpha_standard))
            throw input_error("model alpha_critical must lie in (0, alpha_standard)");
        const std::string pooling = doc["pooling"].get<std::string>();
        if (pooling == "group") {
            model.pooling = PoolingMode::GroupPooled;
            model.crit_present = detail::parse_threshold(thr.at("crit_present"));
            model.crit_absent = detail::parse_threshold(thr.at("crit_absent"));
            model.standard = detail::parse_threshold(thr.at("standard"));
        } else if (pooling == "per_class") {
            model.pooling = PoolingMode::PerClass;
            if (!thr.contains("per_class") || !thr["per_class"].is_array())
                throw input_error("per_class model needs thresholds.per_class");
            for (const auto& e : thr["per_class"]) {
                ClassThresholds t;
                t.present = detail::parse_threshold(e.at("present"));
                t.absent = detail::parse_threshold(e.at("absent"));
                model.per_class.push_back(t);
            }
        } else {
            throw input_error("unknown pooling token \"" + pooling + "\"");
        }
    } else {
        throw input_error("unknown model mode \"" + mode + "\"");
    }
    return model;
}

}  // namespace lineguard
