#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lineguard/errors.hpp"
#include "lineguard/taxonomy.hpp"

namespace lineguard {

/// Parses the UTF-8 JSON taxonomy document. Array order is canonical order.
inline Taxonomy parse_taxonomy(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("taxonomy file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_array())
        throw input_error("taxonomy file must be an object with a \"classes\" array");

    std::string version = doc.value("version", std::string("unversioned"));
    std::vector<ClassDef> classes;
    for (const auto& entry : doc["classes"]) {
        if (!entry.is_object())
            throw input_error("taxonomy class entries must be objects");
        for (const char* key : {"id", "name", "risk_group", "tube_category"})
            if (!entry.contains(key) || !entry[key].is_string())
                throw input_error(std::string("taxonomy class entry missing string field \"") +
                                  key + "\"");
        ClassDef def;
        def.id = entry["id"].get<std::string>();
        def.display_name = entry["name"].get<std::string>();
        def.risk_group = risk_group_from_token(entry["risk_group"].get<std::string>());
        def.tube_category = entry["tube_category"].get<std::string>();
        classes.push_back(std::move(def));
    }
    return Taxonomy(std::move(version), std::move(classes));
}

inline std::string serialize_taxonomy(const Taxonomy& taxonomy) {
    nlohmann::ordered_json doc;
    doc["version"] = taxonomy.version();
    doc["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : taxonomy.classes()) {
        nlohmann::ordered_json entry;
        entry["id"] = c.id;
        entry["name"] = c.display_name;
        entry["risk_group"] = std::string(to_token(c.risk_group));
        entry["tube_category"] = c.tube_category;
        doc["classes"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

}  // namespace lineguard
