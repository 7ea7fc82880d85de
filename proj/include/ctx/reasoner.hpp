#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctx/kb.hpp"
#include "ctx/rules.hpp"

namespace ctx {

// Functional predicate whose value is the canonical activity of a subject.
inline constexpr const char* kActivityPredicate = "Activity";

// One application of a rule: the derived fact plus the premises it rests on.
struct Derivation {
    FactId fact_id = 0;
    Fact derived_fact;
    std::string rule_id;
    std::vector<FactId> premise_ids;
    SourceTag assigned_source = SourceTag::Deduced; // Scheduled | Deduced
    double confidence = 0.0;
};

// In-place rewrite of a functional base fact by a self-referential rule
// (e.g. an activity reverted because a derived feasibility fact contradicts
// it). The fact keeps its source, confidence and provider.
struct UpdateApplication {
    std::string rule_id;
    FactId old_fact_id = 0;
    FactId new_fact_id = 0;
    std::vector<FactId> premise_ids;
};

struct Conflict {
    std::string subject;
    std::string predicate;
    std::vector<FactId> contenders; // >= 2, pairwise-overlapping validity, >= 2 distinct objects
};

struct Resolution {
    enum class Policy { MergeRule, Precedence };
    Policy policy = Policy::Precedence;
    std::string rule_id; // MergeRule only
    Fact canonical;      // merged fact (MergeRule) or winning contender
    std::vector<FactId> contender_ids;
    std::vector<FactId> shadowed_ids;
};

struct CurrentActivity {
    Value object;
    double confidence = 0.0;
    SourceTag source = SourceTag::Defined;
};

// The Context Reasoning Engine: forward-chains inference rules to a fixpoint,
// classifies each derivation as Scheduled or Deduced, applies functional
// updates, keeps derivations consistent under retraction, and resolves
// activity conflicts.
//
// The engine is a single logical task: never run it concurrently with itself.
class ReasoningEngine {
public:
    explicit ReasoningEngine(RuleSet rules);

    struct RunReport {
        std::vector<Derivation> derivations;
        std::vector<UpdateApplication> updates;
        std::vector<FactId> retracted;
        std::vector<Conflict> conflicts;
        std::vector<Resolution> resolutions;

        bool changed_kb() const {
            return !derivations.empty() || !updates.empty() || !retracted.empty();
        }
    };

    // Full maintenance pass over the KB: inference fixpoint, functional
    // updates, truth-maintenance sweep, conflict detection and resolution.
    // Iterates until quiescent; one call is idempotent on an unchanged KB.
    RunReport run(KnowledgeBase& kb);

    // Least fixpoint of the Inference-kind rules over the current KB
    // contents. New derived facts are written to the KB with provider
    // "reasoner"; one Derivation is returned per fact added. Alternative
    // supports for facts that already exist are recorded silently.
    std::vector<Derivation> infer(KnowledgeBase& kb);

    // Truth maintenance after a base-fact retraction: removes every derived
    // fact that no longer has a grounded support chain. Returns their ids.
    std::vector<FactId> retract_derivations(KnowledgeBase& kb, FactId removed_id);

    // Every (subject, predicate) group of a functional predicate with two or
    // more pairwise-overlapping facts naming distinct objects. Shadowed facts
    // are not contenders; canonical merge outputs are, so a later fact can
    // still challenge them.
    std::vector<Conflict> detect_conflicts(const KnowledgeBase& kb) const;

    // Pure resolution policy: a merge rule whose object set equals the
    // contenders' exactly wins; otherwise max confidence with source
    // precedence, latest valid_from and lowest fact id as tie-breakers.
    Resolution resolve_conflict(const KnowledgeBase& kb, const Conflict& c) const;

    // Canonical activity of `subject` at time `at`, after inference and
    // conflict resolution. nullopt when no activity fact covers `at`.
    std::optional<CurrentActivity> current_activity(const KnowledgeBase& kb,
                                                    const std::string& subject,
                                                    Timestamp at) const;

    // Rejects rules naming predicates the ontology does not declare.
    void validate_rules(const Ontology& ontology) const;

    // Winner ordering shared by precedence resolution and current_activity:
    // confidence, then source precedence, then latest valid_from, then id.
    static bool beats(const Fact& a, const Fact& b);

    struct Support {
        std::string rule_id;
        std::vector<FactId> premises;
        double confidence = 0.0;
        bool defined_pure = false;
    };

    const std::map<FactId, std::vector<Support>>& supports() const { return supports_; }
    const RuleSet& rules() const { return rules_; }

private:
    std::vector<UpdateApplication> apply_functional_updates(KnowledgeBase& kb);
    std::vector<FactId> sweep(KnowledgeBase& kb);
    void reconcile_shadows(KnowledgeBase& kb);
    bool fact_defined_pure(const Fact& f) const;
    void forget(FactId id);

    RuleSet rules_;
    std::vector<Rule> inference_rules_; // Inference kind, minus functional updates
    std::vector<Rule> update_rules_;    // self-referential functional rewrites
    std::vector<Rule> merge_rules_;     // ConflictResolution kind

    std::map<FactId, std::vector<Support>> supports_;
    std::map<FactId, bool> pureness_; // derived facts: all transitive base premises Defined

    // Resolution bookkeeping: winning or merged fact id -> facts it shadows.
    // When the key fact leaves the KB its victims are released for a fresh
    // resolution pass.
    std::map<FactId, std::vector<FactId>> shadow_registry_;
};

} // namespace ctx
