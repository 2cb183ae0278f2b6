#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lineguard/errors.hpp"
#include "lineguard/taxonomy.hpp"

namespace lineguard {

/// One image's probability vector plus optional binary ground truth, aligned
/// to the taxonomy's canonical class order.
struct ScoredCase {
    std::string case_id;
    std::string patient_id;  // empty = unknown; treated as a singleton patient
    std::vector<double> scores;
    std::optional<std::vector<std::uint8_t>> labels;  // 0/1 per class

    bool has_labels() const { return labels.has_value(); }
};

inline void validate_case_width(const ScoredCase& c, const Taxonomy& taxonomy) {
    if (c.scores.size() != taxonomy.size())
        throw input_error("case \"" + c.case_id + "\" has " +
                          std::to_string(c.scores.size()) + " scores but taxonomy has " +
                          std::to_string(taxonomy.size()) + " classes");
    if (c.labels && c.labels->size() != taxonomy.size())
        throw input_error("case \"" + c.case_id + "\" has a label vector of width " +
                          std::to_string(c.labels->size()) + ", expected " +
                          std::to_string(taxonomy.size()));
}

inline void require_labels(const ScoredCase& c) {
    if (!c.labels)
        throw input_error("case \"" + c.case_id + "\" has no labels");
}

}  // namespace lineguard
