#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctx/kb.hpp"
#include "ctx/mapping.hpp"

namespace ctx {

inline const std::vector<std::string> kProviderKinds = {"timetable", "calendar", "email",
                                                        "weather",   "profile",  "generic"};

struct ProviderDescriptor {
    std::string provider_id;
    std::string kind; // one of kProviderKinds
    SourceTag default_source = SourceTag::Sensed;
    double default_confidence = 0.9;

    enum class Mode { Push, Poll };
    Mode mode = Mode::Push;
    std::optional<std::int64_t> poll_interval; // seconds; Poll mode only

    // False when the source document gave no confidence, so the caller may
    // substitute the configured default for the source tag.
    bool confidence_explicit = true;

    nlohmann::ordered_json to_json() const;
    static ProviderDescriptor from_json(const nlohmann::json& j);
};

struct ProviderEvent {
    std::string provider_id;
    Timestamp event_time = 0;
    nlohmann::json payload; // flat map of string -> string/number/boolean
    std::int64_t sequence_no = 0;

    nlohmann::ordered_json to_json() const;
    static ProviderEvent from_json(const nlohmann::json& j);
};

// The Context Acquisition Module: registers providers and normalizes their
// events into ontology-valid facts via the mapping rule set. The one place
// where base facts enter the knowledge base.
class AcquisitionModule {
public:
    AcquisitionModule(KnowledgeBase& kb, MappingRuleSet mapping);

    // Throws DuplicateProvider, InvalidInterval, ConfigInvalid (unknown kind
    // or derived default source).
    void register_provider(const ProviderDescriptor& d);

    // Translates and stores one event; returns the new fact ids. Events must
    // arrive with strictly increasing sequence numbers per provider.
    // Throws UnknownProvider, StaleEvent, UnmappedPayload, and KB validation
    // errors.
    std::vector<FactId> ingest(const ProviderEvent& e);

    // Direct user statement: source Defined, confidence 1.0, provider
    // "user:<subject>", valid from `at` until revised.
    FactId user_update(const std::string& subject, const std::string& predicate,
                       const Value& object, Timestamp at);

    std::optional<ProviderDescriptor> provider(const std::string& id) const;
    std::vector<ProviderDescriptor> providers() const;
    std::int64_t last_seen(const std::string& provider_id) const;

    const MappingRuleSet& mapping() const { return mapping_; }

private:
    KnowledgeBase& kb_;
    MappingRuleSet mapping_;
    std::map<std::string, ProviderDescriptor> providers_;
    std::map<std::string, std::int64_t> last_seen_;
    mutable std::mutex mutex_;
};

} // namespace ctx
