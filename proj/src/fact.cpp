#include "ctx/fact.hpp"

#include "ctx/errors.hpp"

namespace ctx {

bool is_base_source(SourceTag s) {
    return s == SourceTag::Defined || s == SourceTag::Sensed || s == SourceTag::Planned ||
           s == SourceTag::Aggregated;
}

std::string source_name(SourceTag s) {
    switch (s) {
        case SourceTag::Defined: return "Defined";
        case SourceTag::Sensed: return "Sensed";
        case SourceTag::Planned: return "Planned";
        case SourceTag::Aggregated: return "Aggregated";
        case SourceTag::Scheduled: return "Scheduled";
        case SourceTag::Deduced: return "Deduced";
    }
    return "?";
}

SourceTag source_from_name(const std::string& name) {
    if (name == "Defined") return SourceTag::Defined;
    if (name == "Sensed") return SourceTag::Sensed;
    if (name == "Planned") return SourceTag::Planned;
    if (name == "Aggregated") return SourceTag::Aggregated;
    if (name == "Scheduled") return SourceTag::Scheduled;
    if (name == "Deduced") return SourceTag::Deduced;
    throw Error(Errc::ValidationFailed, "unknown source tag '" + name + "'");
}

int source_precedence(SourceTag s) {
    switch (s) {
        case SourceTag::Defined: return 5;
        case SourceTag::Sensed: return 4;
        case SourceTag::Planned: return 3;
        case SourceTag::Aggregated: return 2;
        case SourceTag::Scheduled: return 1;
        case SourceTag::Deduced: return 0;
    }
    return -1;
}

std::string Fact::display() const {
    std::string s = predicate + "(" + subject + ", " + object.display() + ")";
    s += " [" + source_name(source) + " " + std::to_string(confidence);
    s += " " + format_timestamp(validity.from) + "..";
    s += validity.to ? format_timestamp(*validity.to) : std::string("open");
    s += "]";
    return s;
}

nlohmann::ordered_json Fact::to_json() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["subject"] = subject;
    j["predicate"] = predicate;
    j["object"] = object.to_json();
    j["valid_from"] = format_timestamp(validity.from);
    if (validity.to) j["valid_to"] = format_timestamp(*validity.to);
    j["source"] = source_name(source);
    j["confidence"] = confidence;
    j["provider"] = provider;
    if (flagged) j["flagged"] = true;
    if (shadowed) j["shadowed"] = true;
    if (canonical) j["canonical"] = true;
    return j;
}

Fact Fact::from_json(const nlohmann::json& j) {
    Fact f;
    f.id = j.value("id", FactId{0});
    f.subject = j.at("subject").get<std::string>();
    f.predicate = j.at("predicate").get<std::string>();
    f.object = Value::from_json(j.at("object"));
    f.validity.from = parse_timestamp(j.at("valid_from").get<std::string>());
    if (j.contains("valid_to") && !j["valid_to"].is_null())
        f.validity.to = parse_timestamp(j["valid_to"].get<std::string>());
    f.source = source_from_name(j.at("source").get<std::string>());
    f.confidence = j.at("confidence").get<double>();
    f.provider = j.value("provider", "");
    f.flagged = j.value("flagged", false);
    f.shadowed = j.value("shadowed", false);
    f.canonical = j.value("canonical", false);
    return f;
}

} // namespace ctx
