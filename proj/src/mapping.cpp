#include "ctx/mapping.hpp"

#include <fstream>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

std::string payload_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return nlohmann::json(v).dump();
    throw Error(Errc::UnmappedPayload, "payload field is not a string, number or boolean");
}

// Expands ${field} references. Returns the raw payload value when the
// template is exactly one reference, so numbers and booleans survive.
nlohmann::json expand(const std::string& tmpl, const nlohmann::json& payload) {
    if (tmpl.size() > 3 && tmpl.rfind("${", 0) == 0 && tmpl.back() == '}' &&
        tmpl.find('}') == tmpl.size() - 1) {
        std::string field = tmpl.substr(2, tmpl.size() - 3);
        if (!payload.contains(field))
            throw Error(Errc::UnmappedPayload, "payload lacks field '" + field + "'");
        return payload.at(field);
    }
    std::string out;
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find("${", pos);
        if (open == std::string::npos) {
            out += tmpl.substr(pos);
            break;
        }
        size_t close = tmpl.find('}', open);
        if (close == std::string::npos)
            throw Error(Errc::UnmappedPayload, "unterminated ${ in template '" + tmpl + "'");
        out += tmpl.substr(pos, open - pos);
        std::string field = tmpl.substr(open + 2, close - open - 2);
        if (!payload.contains(field))
            throw Error(Errc::UnmappedPayload, "payload lacks field '" + field + "'");
        out += payload_text(payload.at(field));
        pos = close + 1;
    }
    return out;
}

std::string expand_text(const std::string& tmpl, const nlohmann::json& payload) {
    nlohmann::json v = expand(tmpl, payload);
    return payload_text(v);
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                         const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok)
            throw Error(Errc::ConfigInvalid,
                        std::string(what) + " has unknown key '" + it.key() + "'");
    }
}

} // namespace

Value normalize_object(const nlohmann::json& raw) {
    if (raw.is_boolean()) return Value::boolean(raw.get<bool>());
    if (raw.is_number()) return Value::number(raw.get<double>());
    if (!raw.is_string())
        throw Error(Errc::UnmappedPayload, "object value is not a string, number or boolean");
    std::string s = raw.get<std::string>();
    if (is_identifier(s)) return Value::ident(s);
    std::string c = camelize(s);
    if (!c.empty()) return Value::ident(c);
    return Value::str(s);
}

nlohmann::ordered_json MappingTemplate::to_json() const {
    nlohmann::ordered_json j;
    j["pred"] = predicate;
    j["subj"] = subject;
    j["obj"] = object;
    if (valid_from) j["valid_from"] = *valid_from;
    if (valid_to) j["valid_to"] = *valid_to;
    if (duration) j["duration"] = *duration;
    if (source) j["source"] = source_name(*source);
    if (confidence) j["confidence"] = *confidence;
    return j;
}

MappingTemplate MappingTemplate::from_json(const nlohmann::json& j) {
    reject_unknown_keys(
        j, {"pred", "subj", "obj", "valid_from", "valid_to", "duration", "source", "confidence"},
        "mapping template");
    MappingTemplate t;
    t.predicate = j.at("pred").get<std::string>();
    t.subject = j.at("subj").get<std::string>();
    t.object = j.at("obj").get<std::string>();
    if (j.contains("valid_from")) t.valid_from = j.at("valid_from").get<std::string>();
    if (j.contains("valid_to")) t.valid_to = j.at("valid_to").get<std::string>();
    if (j.contains("duration")) t.duration = j.at("duration").get<std::int64_t>();
    if (j.contains("source")) {
        SourceTag s = source_from_name(j.at("source").get<std::string>());
        if (!is_base_source(s))
            throw Error(Errc::ConfigInvalid, "mapping template may not emit derived sources");
        t.source = s;
    }
    if (j.contains("confidence")) t.confidence = j.at("confidence").get<double>();
    return t;
}

bool MappingEntry::matches(const nlohmann::json& payload) const {
    for (const std::string& field : require)
        if (!payload.contains(field)) return false;
    for (const auto& [field, expected] : equals) {
        if (!payload.contains(field)) return false;
        if (payload_text(payload.at(field)) != expected) return false;
    }
    return true;
}

nlohmann::ordered_json MappingEntry::to_json() const {
    nlohmann::ordered_json when;
    if (!require.empty()) when["has"] = require;
    if (!equals.empty()) when["equals"] = equals;
    auto emits = nlohmann::ordered_json::array();
    for (const auto& t : emit) emits.push_back(t.to_json());
    return {{"when", when}, {"emit", emits}};
}

MappingEntry MappingEntry::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"when", "emit"}, "mapping entry");
    MappingEntry e;
    if (j.contains("when")) {
        const auto& w = j.at("when");
        reject_unknown_keys(w, {"has", "equals"}, "mapping guard");
        if (w.contains("has"))
            for (const auto& f : w.at("has")) e.require.push_back(f.get<std::string>());
        if (w.contains("equals"))
            for (auto it = w.at("equals").begin(); it != w.at("equals").end(); ++it)
                e.equals[it.key()] = payload_text(it.value());
    }
    if (!j.contains("emit") || j.at("emit").empty())
        throw Error(Errc::ConfigInvalid, "mapping entry emits nothing");
    for (const auto& t : j.at("emit")) e.emit.push_back(MappingTemplate::from_json(t));
    return e;
}

std::vector<Fact> MappingRuleSet::translate(const std::string& kind,
                                            const nlohmann::json& payload, Timestamp event_time,
                                            SourceTag default_source,
                                            double default_confidence) const {
    auto it = by_kind.find(kind);
    if (it == by_kind.end())
        throw Error(Errc::UnmappedPayload, "no mapping rules for provider kind '" + kind + "'");

    for (const MappingEntry& entry : it->second) {
        if (!entry.matches(payload)) continue;
        std::vector<Fact> facts;
        for (const MappingTemplate& t : entry.emit) {
            Fact f;
            std::string subject = expand_text(t.subject, payload);
            if (!is_identifier(subject)) subject = camelize(subject);
            if (subject.empty())
                throw Error(Errc::UnmappedPayload,
                            "subject template '" + t.subject + "' yields no identifier");
            f.subject = subject;
            f.predicate = t.predicate;
            f.object = normalize_object(expand(t.object, payload));
            f.validity.from =
                t.valid_from ? parse_timestamp(expand_text(*t.valid_from, payload)) : event_time;
            if (t.valid_to)
                f.validity.to = parse_timestamp(expand_text(*t.valid_to, payload));
            else if (t.duration)
                f.validity.to = f.validity.from + *t.duration;
            f.source = t.source.value_or(default_source);
            f.confidence = t.confidence.value_or(default_confidence);
            facts.push_back(std::move(f));
        }
        return facts;
    }
    throw Error(Errc::UnmappedPayload, "no '" + kind + "' mapping entry matches the payload");
}

void MappingRuleSet::validate_against(const Ontology& ontology) const {
    for (const auto& [kind, entries] : by_kind)
        for (const MappingEntry& e : entries)
            for (const MappingTemplate& t : e.emit)
                if (!ontology.find_predicate(t.predicate))
                    throw Error(Errc::ConfigInvalid, "mapping for kind '" + kind +
                                                         "' emits unknown predicate " +
                                                         t.predicate);
}

nlohmann::ordered_json MappingRuleSet::to_json() const {
    auto blocks = nlohmann::ordered_json::array();
    for (const auto& [kind, entries] : by_kind) {
        auto rules = nlohmann::ordered_json::array();
        for (const auto& e : entries) rules.push_back(e.to_json());
        blocks.push_back({{"kind", kind}, {"rules", rules}});
    }
    return {{"mappings", blocks}};
}

MappingRuleSet MappingRuleSet::from_json(const nlohmann::json& j) {
    MappingRuleSet m;
    auto add_block = [&](const nlohmann::json& block) {
        reject_unknown_keys(block, {"kind", "rules"}, "mapping block");
        std::string kind = block.at("kind").get<std::string>();
        if (m.by_kind.count(kind))
            throw Error(Errc::ConfigInvalid, "duplicate mapping block for kind '" + kind + "'");
        auto& entries = m.by_kind[kind];
        for (const auto& r : block.at("rules")) entries.push_back(MappingEntry::from_json(r));
    };
    if (j.is_array()) {
        for (const auto& block : j) add_block(block);
    } else if (j.contains("mappings")) {
        reject_unknown_keys(j, {"mappings"}, "mapping file");
        for (const auto& block : j.at("mappings")) add_block(block);
    } else {
        add_block(j);
    }
    return m;
}

MappingRuleSet MappingRuleSet::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open mapping file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigInvalid, "mapping file " + path + ": " + e.what());
    }
    return from_json(j);
}

} // namespace ctx
