#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctx/fact.hpp"

namespace ctx {

// Subject or object slot of a pattern: a variable ("?x"), or a constant.
struct Term {
    bool is_var = false;
    std::string var;
    Value constant;

    static Term variable(std::string name) { return {true, std::move(name), {}}; }
    static Term value(Value v) { return {false, {}, std::move(v)}; }

    bool operator==(const Term&) const = default;
};

using Binding = std::map<std::string, Value>;

// Query/subscription pattern. A wildcard predicate is spelled "*". Shared
// variable names across slots impose an equality constraint.
struct Pattern {
    std::string predicate = "*"; // identifier or "*"
    Term subject = Term::variable("?s");
    Term object = Term::variable("?o");
    std::optional<Timestamp> time_at;
    std::optional<std::set<SourceTag>> source_filter;

    // Structural match ignoring time: predicate, terms, source filter.
    // `binding` is extended with this pattern's variable assignments.
    bool match(const Fact& f, Binding& binding) const;

    // Full match as used by subscriptions: structural plus time_at coverage.
    bool matches_fact(const Fact& f) const;

    std::string display() const;

    nlohmann::ordered_json to_json() const;
    static Pattern from_json(const nlohmann::json& j);

    // Text form: Predicate(subject, object), e.g. "Activity(John, ?a)".
    // Throws Error(MalformedPattern).
    static Pattern parse(const std::string& text);
};

struct QueryResult {
    FactId fact_id = 0;
    Fact fact;
    Binding binding;
};

} // namespace ctx
