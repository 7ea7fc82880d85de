#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctx/fact.hpp"
#include "ctx/ontology.hpp"

namespace ctx {

// One fact template of a mapping entry. String slots may embed ${field}
// references into the event payload; a slot that is exactly one reference
// keeps the payload value's native type.
struct MappingTemplate {
    std::string predicate;
    std::string subject;
    std::string object;
    std::optional<std::string> valid_from; // ISO timestamp after expansion
    std::optional<std::string> valid_to;   // ISO timestamp after expansion
    std::optional<std::int64_t> duration;  // seconds from valid_from
    std::optional<SourceTag> source;       // provider default otherwise
    std::optional<double> confidence;      // provider default otherwise

    nlohmann::ordered_json to_json() const;
    static MappingTemplate from_json(const nlohmann::json& j);
};

// Guarded translation entry: fires when the payload has all `require` fields
// and matches every `equals` pair. Entries are tried in order; the first
// match emits.
struct MappingEntry {
    std::vector<std::string> require;
    std::map<std::string, std::string> equals;
    std::vector<MappingTemplate> emit;

    bool matches(const nlohmann::json& payload) const;

    nlohmann::ordered_json to_json() const;
    static MappingEntry from_json(const nlohmann::json& j);
};

// Collapses a payload value to a fact object: native numbers and booleans
// pass through; strings become identifiers (camelized when needed) and stay
// string literals only when nothing identifier-shaped survives.
Value normalize_object(const nlohmann::json& raw);

// Per provider-kind translation table, loaded from configuration so new
// provider kinds need no rebuild.
struct MappingRuleSet {
    std::map<std::string, std::vector<MappingEntry>> by_kind;

    // Translates one payload. `event_time` anchors templates without an
    // explicit validity. Throws Error(UnmappedPayload) when no entry of the
    // kind matches or a template references a missing field.
    std::vector<Fact> translate(const std::string& kind, const nlohmann::json& payload,
                                Timestamp event_time, SourceTag default_source,
                                double default_confidence) const;

    // Every template predicate must exist in the ontology.
    void validate_against(const Ontology& ontology) const;

    nlohmann::ordered_json to_json() const;
    static MappingRuleSet from_json(const nlohmann::json& j);
    static MappingRuleSet load_file(const std::string& path);
};

} // namespace ctx
