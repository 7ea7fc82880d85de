#include "ctx/rules.hpp"

#include <fstream>
#include <set>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

Term term_from_json(const nlohmann::json& v) {
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (!s.empty() && s[0] == '?') return Term::variable(s);
    }
    return Term::value(Value::from_json(v));
}

nlohmann::ordered_json term_to_json(const Term& t) {
    return t.is_var ? nlohmann::ordered_json(t.var) : t.constant.to_json();
}

void collect_vars(const Term& t, std::set<std::string>& vars) {
    if (t.is_var) vars.insert(t.var);
}

} // namespace

bool Rule::is_functional_update() const {
    for (const auto& a : antecedents) {
        if (a.predicate != consequent.predicate) continue;
        if (a.subject != consequent.subject) continue;
        if (a.object == consequent.object) continue;
        return true;
    }
    return false;
}

void Rule::validate() const {
    if (id.empty()) throw Error(Errc::RuleValidation, "rule without id");
    if (antecedents.empty())
        throw Error(Errc::RuleValidation, "rule '" + id + "' has no antecedents");
    if (!(factor > 0.0 && factor <= 1.0))
        throw Error(Errc::RuleValidation, "rule '" + id + "' factor outside (0,1]");
    if (!is_identifier(consequent.predicate))
        throw Error(Errc::RuleValidation, "rule '" + id + "' consequent predicate is not an identifier");

    std::set<std::string> bound;
    for (const auto& a : antecedents) {
        if (a.predicate == "*")
            throw Error(Errc::RuleValidation, "rule '" + id + "' uses a wildcard antecedent predicate");
        collect_vars(a.subject, bound);
        collect_vars(a.object, bound);
    }
    std::set<std::string> used;
    collect_vars(consequent.subject, used);
    collect_vars(consequent.object, used);
    for (const auto& v : used)
        if (!bound.count(v))
            throw Error(Errc::RuleValidation,
                        "rule '" + id + "' consequent variable " + v + " is unbound");
}

nlohmann::ordered_json Rule::to_json() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["kind"] = kind == Kind::Inference ? "inference" : "conflict_resolution";
    j["factor"] = factor;
    auto ifs = nlohmann::ordered_json::array();
    for (const auto& a : antecedents) {
        nlohmann::ordered_json pj;
        pj["pred"] = a.predicate;
        pj["subj"] = term_to_json(a.subject);
        pj["obj"] = term_to_json(a.object);
        ifs.push_back(pj);
    }
    j["if"] = ifs;
    j["then"] = {{"pred", consequent.predicate},
                 {"subj", term_to_json(consequent.subject)},
                 {"obj", term_to_json(consequent.object)}};
    return j;
}

Rule Rule::from_json(const nlohmann::json& j) {
    Rule r;
    r.id = j.value("id", "");
    const std::string kind = j.value("kind", "inference");
    if (kind == "inference")
        r.kind = Kind::Inference;
    else if (kind == "conflict_resolution")
        r.kind = Kind::ConflictResolution;
    else
        throw Error(Errc::RuleValidation, "rule '" + r.id + "' has unknown kind '" + kind + "'");
    r.factor = j.value("factor", 1.0);
    for (const auto& a : j.value("if", nlohmann::json::array())) {
        Pattern p;
        p.predicate = a.value("pred", "*");
        if (a.contains("subj")) p.subject = term_from_json(a["subj"]);
        if (a.contains("obj")) p.object = term_from_json(a["obj"]);
        r.antecedents.push_back(std::move(p));
    }
    if (j.contains("then")) {
        const auto& t = j["then"];
        r.consequent.predicate = t.value("pred", "");
        if (t.contains("subj")) r.consequent.subject = term_from_json(t["subj"]);
        if (t.contains("obj")) r.consequent.object = term_from_json(t["obj"]);
    }
    r.validate();
    return r;
}

std::vector<const Rule*> RuleSet::of_kind(Rule::Kind k) const {
    std::vector<const Rule*> out;
    for (const auto& r : rules)
        if (r.kind == k) out.push_back(&r);
    return out;
}

RuleSet RuleSet::from_json(const nlohmann::json& j) {
    RuleSet rs;
    std::set<std::string> ids;
    for (const auto& rj : j.value("rules", nlohmann::json::array())) {
        Rule r = Rule::from_json(rj);
        if (!ids.insert(r.id).second)
            throw Error(Errc::RuleValidation, "duplicate rule id '" + r.id + "'");
        rs.rules.push_back(std::move(r));
    }
    return rs;
}

RuleSet RuleSet::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open rules file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ScriptParse, "bad JSON in '" + path + "': " + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json RuleSet::to_json() const {
    nlohmann::ordered_json j;
    j["rules"] = nlohmann::ordered_json::array();
    for (const auto& r : rules) j["rules"].push_back(r.to_json());
    return j;
}

} // namespace ctx
