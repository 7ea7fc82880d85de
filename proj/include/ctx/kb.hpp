#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ctx/ontology.hpp"
#include "ctx/pattern.hpp"

namespace ctx {

struct Notification {
    enum class Kind { Added, Retracted, Modified };
    Kind kind = Kind::Added;
    Fact fact;                // new version for Modified
    std::optional<Fact> old;  // previous version, Modified only
    std::int64_t seq = 0;     // position in the total mutation order

    static std::string kind_name(Kind k) {
        switch (k) {
            case Kind::Added: return "added";
            case Kind::Retracted: return "retracted";
            case Kind::Modified: return "modified";
        }
        return "?";
    }
};

// Returning false (or throwing) from a consumer drops the subscription.
using Consumer = std::function<bool(const Notification&)>;

using SubId = std::int64_t;

// A (subject, predicate) pair carrying two or more overlapping facts with
// distinct objects for a functional predicate. Raised at insertion time and
// handed to the reasoner; the knowledge base never resolves conflicts itself.
struct ConflictFlag {
    std::string subject;
    std::string predicate;
    std::vector<FactId> fact_ids;
};

// The Context Knowledge Base: a totally ordered mutation stream over stored
// facts, with pattern queries and exactly-once change notifications.
//
// All mutations serialize on one lock; notifications are delivered on the
// mutating thread, in mutation order. Consumers may issue queries but must
// not mutate the KB from inside a callback.
class KnowledgeBase {
public:
    KnowledgeBase(Ontology ontology, bool strict = true);

    // Opens (and appends to) a newline-delimited JSON journal. Every mutation
    // is recorded; replaying the file from empty reproduces the KB state.
    void attach_journal(const std::string& path);

    // Replays a journal file into this (normally empty) KB. Facts keep their
    // original ids; validation is skipped, the journal is trusted.
    void load_journal(const std::string& path);

    FactId add_fact(Fact f);
    bool delete_fact(FactId id);
    FactId modify_fact(FactId id, Fact replacement);

    std::vector<QueryResult> query(const Pattern& p) const;

    SubId subscribe(Pattern p, Consumer consumer);
    bool unsubscribe(SubId id);

    std::optional<Fact> find(FactId id) const;
    std::vector<Fact> all_facts() const;
    size_t size() const;

    // Conflict flags raised by functional-predicate collisions since the last
    // call; the reasoner drains these after each mutation batch.
    std::vector<ConflictFlag> take_conflict_flags();

    void set_shadowed(FactId id, bool shadowed);

    const Ontology& ontology() const { return *ontology_; }
    void swap_ontology(Ontology next);
    bool strict() const { return strict_; }

private:
    struct Subscription {
        SubId id;
        Pattern pattern;
        Consumer consumer;
    };

    FactId add_locked(Fact f, bool from_replay);
    bool delete_locked(FactId id, bool from_replay);
    void validate_invariants(Fact& f) const;
    void flag_functional_conflicts(const Fact& stored);
    void notify(const Notification& n);
    void journal_append(const nlohmann::ordered_json& record);

    std::shared_ptr<const Ontology> ontology_;
    bool strict_;
    std::map<FactId, Fact> facts_;
    FactId next_fact_id_ = 1;
    SubId next_sub_id_ = 1;
    std::int64_t mutation_seq_ = 0;
    std::vector<Subscription> subscriptions_;
    std::vector<ConflictFlag> pending_conflicts_;
    std::unique_ptr<std::ofstream> journal_;
    mutable std::recursive_mutex mutex_;
};

} // namespace ctx
