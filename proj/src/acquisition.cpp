#include "ctx/acquisition.hpp"

#include <algorithm>

#include "ctx/errors.hpp"

namespace ctx {

nlohmann::ordered_json ProviderDescriptor::to_json() const {
    nlohmann::ordered_json j;
    j["provider_id"] = provider_id;
    j["kind"] = kind;
    j["source"] = source_name(default_source);
    j["confidence"] = default_confidence;
    j["mode"] = mode == Mode::Push ? "push" : "poll";
    if (poll_interval) j["poll_interval"] = *poll_interval;
    return j;
}

ProviderDescriptor ProviderDescriptor::from_json(const nlohmann::json& j) {
    ProviderDescriptor d;
    d.provider_id = j.at("provider_id").get<std::string>();
    d.kind = j.at("kind").get<std::string>();
    if (j.contains("source")) d.default_source = source_from_name(j.at("source").get<std::string>());
    d.confidence_explicit = j.contains("confidence");
    if (d.confidence_explicit) d.default_confidence = j.at("confidence").get<double>();
    if (j.contains("mode")) {
        std::string m = j.at("mode").get<std::string>();
        if (m == "push")
            d.mode = Mode::Push;
        else if (m == "poll")
            d.mode = Mode::Poll;
        else
            throw Error(Errc::ConfigInvalid, "provider mode must be push or poll, got '" + m + "'");
    }
    if (j.contains("poll_interval")) d.poll_interval = j.at("poll_interval").get<std::int64_t>();
    return d;
}

nlohmann::ordered_json ProviderEvent::to_json() const {
    nlohmann::ordered_json j;
    j["provider_id"] = provider_id;
    j["time"] = format_timestamp(event_time);
    j["seq"] = sequence_no;
    j["payload"] = payload;
    return j;
}

ProviderEvent ProviderEvent::from_json(const nlohmann::json& j) {
    ProviderEvent e;
    e.provider_id = j.at("provider_id").get<std::string>();
    e.event_time = parse_timestamp(j.at("time").get<std::string>());
    e.sequence_no = j.at("seq").get<std::int64_t>();
    e.payload = j.value("payload", nlohmann::json::object());
    if (!e.payload.is_object())
        throw Error(Errc::UnmappedPayload, "event payload must be a JSON object");
    return e;
}

AcquisitionModule::AcquisitionModule(KnowledgeBase& kb, MappingRuleSet mapping)
    : kb_(kb), mapping_(std::move(mapping)) {
    mapping_.validate_against(kb_.ontology());
}

void AcquisitionModule::register_provider(const ProviderDescriptor& d) {
    if (!is_identifier(d.provider_id))
        throw Error(Errc::ConfigInvalid, "provider id '" + d.provider_id + "' is not an identifier");
    if (std::find(kProviderKinds.begin(), kProviderKinds.end(), d.kind) == kProviderKinds.end())
        throw Error(Errc::UnknownKind, "provider kind '" + d.kind + "' is not supported");
    if (!is_base_source(d.default_source))
        throw Error(Errc::ConfigInvalid,
                    "provider '" + d.provider_id + "' may not default to a derived source");
    if (!(d.default_confidence >= 0.0 && d.default_confidence <= 1.0))
        throw Error(Errc::ConfigInvalid,
                    "provider '" + d.provider_id + "' confidence outside [0,1]");
    if (d.mode == ProviderDescriptor::Mode::Poll && (!d.poll_interval || *d.poll_interval <= 0))
        throw Error(Errc::InvalidInterval,
                    "poll provider '" + d.provider_id + "' needs a positive interval");

    std::lock_guard lock(mutex_);
    if (providers_.count(d.provider_id))
        throw Error(Errc::DuplicateProvider, "provider '" + d.provider_id + "' already registered");
    providers_.emplace(d.provider_id, d);
    last_seen_.emplace(d.provider_id, 0);
}

std::vector<FactId> AcquisitionModule::ingest(const ProviderEvent& e) {
    // One critical section covers the sequence check, translation and KB
    // insertion, so a provider's events apply atomically and in order. The
    // KB's own mutation order stays the global synchronization point.
    std::lock_guard lock(mutex_);

    auto pit = providers_.find(e.provider_id);
    if (pit == providers_.end())
        throw Error(Errc::UnknownProvider, "no provider '" + e.provider_id + "' registered");
    const ProviderDescriptor& d = pit->second;

    std::int64_t& seen = last_seen_[e.provider_id];
    if (e.sequence_no <= seen)
        throw Error(Errc::StaleEvent, "provider '" + e.provider_id + "' replayed sequence " +
                                          std::to_string(e.sequence_no) + " (last " +
                                          std::to_string(seen) + ")");

    std::vector<Fact> facts = mapping_.translate(d.kind, e.payload, e.event_time,
                                                 d.default_source, d.default_confidence);
    seen = e.sequence_no;

    std::vector<FactId> ids;
    for (Fact& f : facts) {
        f.provider = e.provider_id;
        ids.push_back(kb_.add_fact(std::move(f)));
    }
    return ids;
}

FactId AcquisitionModule::user_update(const std::string& subject, const std::string& predicate,
                                      const Value& object, Timestamp at) {
    Fact f;
    f.subject = is_identifier(subject) ? subject : camelize(subject);
    f.predicate = predicate;
    f.object = object;
    f.validity.from = at;
    f.source = SourceTag::Defined;
    f.confidence = 1.0;
    f.provider = "user:" + f.subject;
    return kb_.add_fact(std::move(f));
}

std::optional<ProviderDescriptor> AcquisitionModule::provider(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = providers_.find(id);
    if (it == providers_.end()) return std::nullopt;
    return it->second;
}

std::vector<ProviderDescriptor> AcquisitionModule::providers() const {
    std::lock_guard lock(mutex_);
    std::vector<ProviderDescriptor> out;
    for (const auto& [id, d] : providers_) out.push_back(d);
    return out;
}

std::int64_t AcquisitionModule::last_seen(const std::string& provider_id) const {
    std::lock_guard lock(mutex_);
    auto it = last_seen_.find(provider_id);
    if (it == last_seen_.end())
        throw Error(Errc::UnknownProvider, "no provider '" + provider_id + "' registered");
    return it->second;
}

} // namespace ctx
