#pragma once

#include <charconv>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "lineguard/dwa.hpp"
#include "lineguard/errors.hpp"
#include "lineguard/scored_case.hpp"
#include "lineguard/taxonomy.hpp"
#include "lineguard/triage.hpp"

namespace lineguard {
namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = nl + 1;
    }
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

inline double parse_double(std::string_view field, std::size_t row, std::string_view column) {
    double value = 0.0;
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), last, value);
    if (ec != std::errc() || ptr != last)
        throw input_error("row " + std::to_string(row) + ", column \"" + std::string(column) +
                          "\": cannot parse \"" + std::string(field) + "\" as a number");
    return value;
}

// Shortest decimal that round-trips the exact double.
inline std::string format_double(double v) {
    char buf[40];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Scores CSV reader. Header: case_id,patient_id,p:<id>...[,y:<id>...] with
/// p-columns in taxonomy order. Malformed input is rejected, never repaired.
inline std::vector<ScoredCase> read_scores(std::string_view text, const Taxonomy& taxonomy) {
    const auto lines = detail::split_lines(text);
    if (lines.empty()) throw input_error("scores file is empty");
    const auto header = detail::split_fields(lines[0]);
    const std::size_t n_classes = taxonomy.size();
    if (header.size() < 2 || header[0] != "case_id" || header[1] != "patient_id")
        throw input_error("scores header must start with case_id,patient_id");

    // p-block: exactly one column per class, canonical order.
    for (std::size_t i = 0; i < n_classes; ++i) {
        const std::size_t col = 2 + i;
        const std::string expected = "p:" + taxonomy.at(i).id;
        if (col >= header.size())
            throw validation_error("scores header missing column \"" + expected + "\"");
        if (header[col] != expected)
            throw validation_error("scores header column " + std::to_string(col + 1) +
                                   " is \"" + std::string(header[col]) + "\", expected \"" +
                                   expected + "\"");
    }
    // optional y-block, same order
    bool labeled = header.size() > 2 + n_classes;
    if (labeled) {
        if (header.size() != 2 + 2 * n_classes)
            throw validation_error("scores header has trailing columns that are not a full y-block");
        for (std::size_t i = 0; i < n_classes; ++i) {
            const std::size_t col = 2 + n_classes + i;
            const std::string expected = "y:" + taxonomy.at(i).id;
            if (header[col] != expected)
                throw validation_error("scores header column " + std::to_string(col + 1) +
                                       " is \"" + std::string(header[col]) + "\", expected \"" +
                                       expected + "\"");
        }
    }

    std::vector<ScoredCase> cases;
    cases.reserve(lines.size() - 1);
    std::unordered_set<std::string> seen_ids;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto fields = detail::split_fields(lines[row]);
        if (fields.size() != header.size())
            throw input_error("row " + std::to_string(row + 1) + " has " +
                              std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(header.size()));
        ScoredCase c;
        c.case_id = std::string(fields[0]);
        c.patient_id = std::string(fields[1]);
        if (c.case_id.empty())
            throw input_error("row " + std::to_string(row + 1) + " has an empty case_id");
        if (!seen_ids.insert(c.case_id).second)
            throw input_error("duplicate case_id \"" + c.case_id + "\"");
        c.scores.resize(n_classes);
        for (std::size_t i = 0; i < n_classes; ++i) {
            const double p =
                detail::parse_double(fields[2 + i], row + 1, "p:" + taxonomy.at(i).id);
            if (!(p >= 0.0 && p <= 1.0))
                throw input_error("row " + std::to_string(row + 1) + ", column \"p:" +
                                  taxonomy.at(i).id + "\": score " +
                                  std::string(fields[2 + i]) + " outside [0,1]");
            c.scores[i] = p;
        }
        if (labeled) {
            std::vector<std::uint8_t> labels(n_classes);
            for (std::size_t i = 0; i < n_classes; ++i) {
                const auto field = fields[2 + n_classes + i];
                if (field == "0")
                    labels[i] = 0;
                else if (field == "1")
                    labels[i] = 1;
                else
                    throw input_error("row " + std::to_string(row + 1) + ", column \"y:" +
                                      taxonomy.at(i).id + "\": label \"" + std::string(field) +
                                      "\" not in {0,1}");
            }
            c.labels = std::move(labels);
        }
        cases.push_back(std::move(c));
    }
    return cases;
}

/// Writer for the scores CSV. Emits the y-block iff every case is labeled;
/// a mixed cohort is rejected.
inline std::string write_scores(std::span<const ScoredCase> cases, const Taxonomy& taxonomy) {
    bool all_labeled = true, any_labeled = false;
    for (const auto& c : cases) {
        validate_case_width(c, taxonomy);
        if (c.case_id.find(',') != std::string::npos ||
            c.patient_id.find(',') != std::string::npos)
            throw input_error("case/patient ids must not contain commas");
        all_labeled = all_labeled && c.has_labels();
        any_labeled = any_labeled || c.has_labels();
    }
    if (any_labeled && !all_labeled)
        throw input_error("cannot write a cohort where only some cases are labeled");
    const bool labeled = !cases.empty() && all_labeled;

    std::string out = "case_id,patient_id";
    for (const auto& c : taxonomy.classes()) out += ",p:" + c.id;
    if (labeled)
        for (const auto& c : taxonomy.classes()) out += ",y:" + c.id;
    out += "\n";
    for (const auto& c : cases) {
        out += c.case_id;
        out += ',';
        out += c.patient_id;
        for (double p : c.scores) {
            out += ',';
            out += detail::format_double(p);
        }
        if (labeled)
            for (auto y : *c.labels) out += y ? ",1" : ",0";
        out += "\n";
    }
    return out;
}

inline std::string encode_set(const ClassSet& s) {
    std::string out;
    if (s.contains_present) out += 'P';
    if (s.contains_absent) out += 'A';
    return out;
}

/// Verdict CSV: case_id, category token, fully_confident 0/1, then one
/// set:<class_id> column per class with values "", "P", "A" or "PA".
inline std::string write_verdicts(std::span<const CaseVerdict> verdicts,
                                  const Taxonomy& taxonomy) {
    std::string out = "case_id,category,fully_confident";
    for (const auto& c : taxonomy.classes()) out += ",set:" + c.id;
    out += "\n";
    for (const auto& v : verdicts) {
        if (v.sets.per_class.size() != taxonomy.size())
            throw input_error("verdict for \"" + v.case_id + "\" has the wrong set width");
        out += v.case_id;
        out += ',';
        out += to_token(v.triage);
        out += v.confident ? ",1" : ",0";
        for (const auto& s : v.sets.per_class) {
            out += ',';
            out += encode_set(s);
        }
        out += "\n";
    }
    return out;
}

/// Loss-history CSV: header "epoch,<task>..."; rows must be contiguous epochs
/// starting at 0.
inline LossHistory read_loss_history(std::string_view text) {
    const auto lines = detail::split_lines(text);
    if (lines.empty()) throw input_error("loss history file is empty");
    const auto header = detail::split_fields(lines[0]);
    if (header.size() < 2 || header[0] != "epoch")
        throw input_error("loss history header must be epoch,<task>,...");
    LossHistory history;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].empty()) throw input_error("loss history has an empty task column name");
        for (const auto& prior : history.task_ids)
            if (prior == header[i])
                throw input_error("duplicate task column \"" + std::string(header[i]) + "\"");
        history.task_ids.emplace_back(header[i]);
    }
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto fields = detail::split_fields(lines[row]);
        if (fields.size() != header.size())
            throw input_error("loss history row " + std::to_string(row + 1) +
                              " has the wrong field count");
        const double epoch = detail::parse_double(fields[0], row + 1, "epoch");
        if (epoch != static_cast<double>(row - 1))
            throw input_error("loss history epochs must be contiguous from 0; row " +
                              std::to_string(row + 1) + " has epoch " +
                              std::string(fields[0]));
        std::vector<double> losses(history.task_ids.size());
        for (std::size_t i = 0; i < losses.size(); ++i) {
            losses[i] = detail::parse_double(fields[1 + i], row + 1, history.task_ids[i]);
            if (!(losses[i] > 0.0))
                throw input_error("loss history row " + std::to_string(row + 1) +
                                  ": losses must be strictly positive");
        }
        history.epochs.push_back(std::move(losses));
    }
    return history;
}

/// Replay output: one weight row per epoch of the input history.
inline std::string write_weights(const LossHistory& history, const DwaConfig& config) {
    std::string out = "epoch";
    for (const auto& id : history.task_ids) out += "," + id;
    out += "\n";
    for (std::size_t t = 0; t < history.num_epochs(); ++t) {
        const auto weights = dwa_weights(history, t, config);
        out += std::to_string(t);
        for (double w : weights) {
            out += ',';
            out += detail::format_double(w);
        }
        out += "\n";
    }
    return out;
}

}  // namespace lineguard
