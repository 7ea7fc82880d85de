#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ctx/pattern.hpp"

namespace ctx {

// Consequent template over the antecedents' variables.
struct FactTemplate {
    std::string predicate;
    Term subject;
    Term object;
};

// A forward-chaining rule: a conjunction of patterns deriving one new fact.
// Terms are constants or variables only, so the fixpoint always terminates.
struct Rule {
    enum class Kind { Inference, ConflictResolution };

    std::string id;
    Kind kind = Kind::Inference;
    double factor = 1.0; // confidence attenuation in (0, 1]
    std::vector<Pattern> antecedents;
    FactTemplate consequent;

    // True for a rule that rewrites a functional predicate in place:
    // some antecedent shares the consequent's predicate and subject term but
    // names a different object. Such rules update the matched base fact
    // instead of deriving alongside it.
    bool is_functional_update() const;

    // Range restriction and arity checks; throws Error(RuleValidation).
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static Rule from_json(const nlohmann::json& j);
};

struct RuleSet {
    std::vector<Rule> rules;

    std::vector<const Rule*> of_kind(Rule::Kind k) const;

    static RuleSet from_json(const nlohmann::json& j);
    static RuleSet load_file(const std::string& path);
    nlohmann::ordered_json to_json() const;
};

} // namespace ctx
