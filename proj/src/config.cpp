#include "ctx/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

const std::vector<SourceTag> kBaseOrder = {SourceTag::Defined, SourceTag::Sensed,
                                           SourceTag::Planned, SourceTag::Aggregated};

void require_readable(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigInvalid, std::string(what) + " not readable: " + path);
}

} // namespace

double Config::confidence_for(SourceTag s) const {
    auto it = confidence.find(s);
    if (it == confidence.end())
        throw Error(Errc::ConfigInvalid, "no default confidence for source " + source_name(s));
    return it->second;
}

void Config::validate() const {
    double prev = 1.0 + 1e-12;
    for (SourceTag s : kBaseOrder) {
        double v = confidence_for(s);
        if (!(v >= 0.0 && v <= 1.0))
            throw Error(Errc::ConfigInvalid,
                        "confidence for " + source_name(s) + " outside [0,1]");
        if (!(v < prev))
            throw Error(Errc::ConfigInvalid,
                        "confidence table must strictly decrease Defined > Sensed > Planned > "
                        "Aggregated");
        prev = v;
    }
    for (const std::string& doc : ontology_docs) require_readable(doc, "ontology document");
    if (!rules_path.empty()) require_readable(rules_path, "rules file");
    if (!mapping_path.empty()) require_readable(mapping_path, "mapping file");
}

nlohmann::ordered_json Config::to_json() const {
    nlohmann::ordered_json j;
    j["ontology"] = ontology_docs;
    j["rules"] = rules_path;
    j["mapping"] = mapping_path;
    j["strict"] = strict;
    nlohmann::ordered_json table;
    for (SourceTag s : kBaseOrder) table[source_name(s)] = confidence_for(s);
    j["confidence"] = table;
    j["listen"] = listen;
    if (!journal_path.empty()) j["journal"] = journal_path;
    return j;
}

Config Config::from_json(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        static const std::vector<std::string> known = {
            "ontology", "rules", "mapping", "strict", "confidence", "listen", "journal"};
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw Error(Errc::ConfigInvalid, "config has unknown key '" + it.key() + "'");
    }
    Config c;
    if (j.contains("ontology"))
        for (const auto& p : j.at("ontology")) c.ontology_docs.push_back(p.get<std::string>());
    if (j.contains("rules")) c.rules_path = j.at("rules").get<std::string>();
    if (j.contains("mapping")) c.mapping_path = j.at("mapping").get<std::string>();
    if (j.contains("strict")) c.strict = j.at("strict").get<bool>();
    if (j.contains("confidence")) {
        for (auto it = j.at("confidence").begin(); it != j.at("confidence").end(); ++it) {
            SourceTag s = source_from_name(it.key());
            if (!is_base_source(s))
                throw Error(Errc::ConfigInvalid,
                            "confidence table covers base sources only, got " + it.key());
            c.confidence[s] = it.value().get<double>();
        }
    }
    if (j.contains("listen")) c.listen = j.at("listen").get<std::string>();
    if (j.contains("journal")) c.journal_path = j.at("journal").get<std::string>();
    return c;
}

Config Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigInvalid, "config file " + path + ": " + e.what());
    }
    Config c = from_json(j);

    auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (p.empty()) return;
        std::filesystem::path fp(p);
        if (fp.is_relative()) p = (base / fp).lexically_normal().string();
    };
    for (std::string& doc : c.ontology_docs) resolve(doc);
    resolve(c.rules_path);
    resolve(c.mapping_path);
    resolve(c.journal_path);
    return c;
}

} // namespace ctx
