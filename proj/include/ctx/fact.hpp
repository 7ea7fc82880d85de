#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ctx/timeutil.hpp"
#include "ctx/value.hpp"

namespace ctx {

using FactId = std::int64_t;

// Provenance classification of a fact. Defined/Sensed/Planned/Aggregated come
// from providers or users; Scheduled/Deduced are assigned by the reasoner.
enum class SourceTag { Defined, Sensed, Planned, Aggregated, Scheduled, Deduced };

inline constexpr const char* kReasonerProvider = "reasoner";

bool is_base_source(SourceTag s);
std::string source_name(SourceTag s);
SourceTag source_from_name(const std::string& name);

// Precedence used to break confidence ties during conflict resolution:
// Defined > Sensed > Planned > Aggregated > Scheduled > Deduced.
int source_precedence(SourceTag s);

// A timestamped, confidence-weighted, provenance-tagged triple. The unit of
// all context knowledge.
struct Fact {
    FactId id = 0; // assigned by the knowledge base
    std::string subject;
    std::string predicate;
    Value object;
    Interval validity;
    SourceTag source = SourceTag::Sensed;
    double confidence = 1.0;
    std::string provider;
    bool flagged = false;   // admitted in lenient mode without passing validation
    bool shadowed = false;  // lost a conflict resolution; kept for the record
    bool canonical = false; // merged resolution output marked as the canonical activity

    // Identity used by derivation dedup and replay comparison.
    bool same_statement(const Fact& o) const {
        return subject == o.subject && predicate == o.predicate && object == o.object &&
               validity == o.validity;
    }

    bool equivalent(const Fact& o) const {
        return same_statement(o) && source == o.source && confidence == o.confidence &&
               provider == o.provider;
    }

    std::string display() const;

    nlohmann::ordered_json to_json() const;
    static Fact from_json(const nlohmann::json& j);
};

} // namespace ctx
