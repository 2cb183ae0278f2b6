#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lineguard/errors.hpp"

namespace lineguard {

enum class RiskGroup { Critical, Normal, Other };

inline std::string_view to_token(RiskGroup g) {
    switch (g) {
        case RiskGroup::Critical: return "critical";
        case RiskGroup::Normal: return "normal";
        case RiskGroup::Other: return "other";
    }
    return "other";
}

inline RiskGroup risk_group_from_token(std::string_view token) {
    if (token == "critical") return RiskGroup::Critical;
    if (token == "normal") return RiskGroup::Normal;
    if (token == "other") return RiskGroup::Other;
    throw input_error("unknown risk_group token: \"" + std::string(token) + "\"");
}

/// One class in the label registry. `id` is the machine token used in CSV
/// headers; `display_name` is free text for reports.
struct ClassDef {
    std::string id;
    std::string display_name;
    RiskGroup risk_group = RiskGroup::Other;
    std::string tube_category;

    bool operator==(const ClassDef&) const = default;
};

namespace detail {

inline bool is_id_token(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

}  // namespace detail

/// Ordered class registry. Class order is the canonical column order for all
/// score vectors; instances are immutable once constructed.
class Taxonomy {
public:
    Taxonomy(std::string version, std::vector<ClassDef> classes)
        : version_(std::move(version)), classes_(std::move(classes)) {
        validate();
    }

    const std::string& version() const { return version_; }
    const std::vector<ClassDef>& classes() const { return classes_; }
    std::size_t size() const { return classes_.size(); }
    const ClassDef& at(std::size_t i) const { return classes_.at(i); }

    std::optional<std::size_t> index_of(std::string_view id) const {
        for (std::size_t i = 0; i < classes_.size(); ++i)
            if (classes_[i].id == id) return i;
        return std::nullopt;
    }

    /// Distinct tube categories in first-appearance order.
    std::vector<std::string> tube_categories() const {
        std::vector<std::string> cats;
        for (const auto& c : classes_) {
            bool seen = false;
            for (const auto& k : cats)
                if (k == c.tube_category) { seen = true; break; }
            if (!seen) cats.push_back(c.tube_category);
        }
        return cats;
    }

    /// Class indices belonging to one tube category, in canonical order.
    std::vector<std::size_t> category_members(std::string_view category) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < classes_.size(); ++i)
            if (classes_[i].tube_category == category) idx.push_back(i);
        return idx;
    }

    bool operator==(const Taxonomy&) const = default;

private:
    void validate() const {
        if (classes_.empty()) throw input_error("taxonomy has no classes");
        for (std::size_t i = 0; i < classes_.size(); ++i) {
            const auto& c = classes_[i];
            if (!detail::is_id_token(c.id))
                throw input_error("class id \"" + c.id +
                                  "\" is not a lowercase snake token");
            if (c.tube_category.empty())
                throw input_error("class \"" + c.id + "\" has an empty tube_category");
            for (std::size_t j = i + 1; j < classes_.size(); ++j)
                if (classes_[j].id == c.id)
                    throw input_error("duplicate class id \"" + c.id + "\"");
        }
        // A category with a Normal class must also carry a Critical class,
        // otherwise the high-risk-misprediction rule has nothing to check.
        for (const auto& cat : tube_categories()) {
            bool has_normal = false, has_critical = false;
            for (auto i : category_members(cat)) {
                if (classes_[i].risk_group == RiskGroup::Normal) has_normal = true;
                if (classes_[i].risk_group == RiskGroup::Critical) has_critical = true;
            }
            if (has_normal && !has_critical)
                throw input_error("tube_category \"" + cat +
                                  "\" declares a normal class but no critical class");
        }
    }

    std::string version_;
    std::vector<ClassDef> classes_;
};

/// Built-in 11-class registry for the RANZCR CLiP label set.
inline Taxonomy default_ranzcr() {
    using RG = RiskGroup;
    std::vector<ClassDef> classes = {
        {"ett_abnormal", "ETT - Abnormal", RG::Critical, "ETT"},
        {"ett_borderline", "ETT - Borderline", RG::Critical, "ETT"},
        {"ett_normal", "ETT - Normal", RG::Normal, "ETT"},
        {"ngt_abnormal", "NGT - Abnormal", RG::Critical, "NGT"},
        {"ngt_borderline", "NGT - Borderline", RG::Critical, "NGT"},
        {"ngt_incompletely_imaged", "NGT - Incompletely Imaged", RG::Critical, "NGT"},
        {"ngt_normal", "NGT - Normal", RG::Normal, "NGT"},
        {"cvc_abnormal", "CVC - Abnormal", RG::Critical, "CVC"},
        {"cvc_borderline", "CVC - Borderline", RG::Critical, "CVC"},
        {"cvc_normal", "CVC - Normal", RG::Normal, "CVC"},
        {"swan_ganz_catheter_present", "Swan Ganz Catheter Present", RG::Other, "SwanGanz"},
    };
    return Taxonomy("ranzcr-clip-11", std::move(classes));
}

/// FNV-1a 64-bit over the ordered (id, risk_group, tube_category) tuples.
/// Guards model/score-file compatibility; any reorder or edit changes it.
inline std::string fingerprint(const Taxonomy& taxonomy) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0x1f;  // field separator
        h *= 1099511628211ULL;
    };
    for (const auto& c : taxonomy.classes()) {
        mix(c.id);
        mix(to_token(c.risk_group));
        mix(c.tube_category);
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace lineguard
