#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctx/fact.hpp"

namespace ctx {

// Environment variable consulted when no --config flag is given.
inline constexpr const char* kConfigEnvVar = "CONTEXT_KERNEL_CONFIG";

struct Config {
    std::vector<std::string> ontology_docs; // domain documents; upper layer is built in
    std::string rules_path;
    std::string mapping_path;
    bool strict = true;
    // Default confidence per base source. Must be strictly decreasing in the
    // order Defined, Sensed, Planned, Aggregated.
    std::map<SourceTag, double> confidence{{SourceTag::Defined, 1.0},
                                           {SourceTag::Sensed, 0.9},
                                           {SourceTag::Planned, 0.8},
                                           {SourceTag::Aggregated, 0.7}};
    std::string listen = "127.0.0.1:7468";
    std::string journal_path;

    double confidence_for(SourceTag s) const;

    // Throws ConfigInvalid when the table breaks the ordering invariant or a
    // referenced file is unreadable.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static Config from_json(const nlohmann::json& j);

    // Relative paths inside the file resolve against the file's directory.
    static Config load_file(const std::string& path);
};

} // namespace ctx
