#include "ctx/pattern.hpp"

#include <cctype>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

bool is_var_name(const std::string& s) {
    return s.size() >= 2 && s[0] == '?' && is_identifier(s.substr(1));
}

bool bind_term(const Term& t, const Value& actual, Binding& binding) {
    if (!t.is_var) return t.constant == actual;
    auto it = binding.find(t.var);
    if (it != binding.end()) return it->second == actual;
    binding.emplace(t.var, actual);
    return true;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

Term parse_term(const std::string& raw) {
    std::string t = trim(raw);
    if (t.empty()) throw Error(Errc::MalformedPattern, "empty term");
    if (t[0] == '?') {
        if (!is_var_name(t)) throw Error(Errc::MalformedPattern, "bad variable '" + t + "'");
        return Term::variable(t);
    }
    if (t.front() == '"' && t.back() == '"' && t.size() >= 2)
        return Term::value(Value::str(t.substr(1, t.size() - 2)));
    if (t == "true") return Term::value(Value::boolean(true));
    if (t == "false") return Term::value(Value::boolean(false));
    if (std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '-' || t[0] == '+') {
        try {
            size_t used = 0;
            double v = std::stod(t, &used);
            if (used == t.size()) return Term::value(Value::number(v));
        } catch (...) {
        }
        throw Error(Errc::MalformedPattern, "bad numeric term '" + t + "'");
    }
    if (!is_identifier(t)) throw Error(Errc::MalformedPattern, "bad term '" + t + "'");
    return Term::value(Value::ident(t));
}

} // namespace

bool Pattern::match(const Fact& f, Binding& binding) const {
    if (predicate != "*" && predicate != f.predicate) return false;
    if (source_filter && !source_filter->count(f.source)) return false;
    Binding scratch = binding;
    if (!bind_term(subject, Value::ident(f.subject), scratch)) return false;
    if (!bind_term(object, f.object, scratch)) return false;
    binding = std::move(scratch);
    return true;
}

bool Pattern::matches_fact(const Fact& f) const {
    Binding b;
    if (!match(f, b)) return false;
    if (time_at && !f.validity.covers(*time_at)) return false;
    return true;
}

std::string Pattern::display() const {
    auto term_text = [](const Term& t) { return t.is_var ? t.var : t.constant.display(); };
    std::string s = predicate + "(" + term_text(subject) + ", " + term_text(object) + ")";
    if (time_at) s += " @" + format_timestamp(*time_at);
    return s;
}

nlohmann::ordered_json Pattern::to_json() const {
    nlohmann::ordered_json j;
    j["pred"] = predicate;
    j["subj"] = subject.is_var ? nlohmann::ordered_json(subject.var) : subject.constant.to_json();
    j["obj"] = object.is_var ? nlohmann::ordered_json(object.var) : object.constant.to_json();
    if (time_at) j["at"] = format_timestamp(*time_at);
    if (source_filter) {
        auto arr = nlohmann::ordered_json::array();
        for (auto s : *source_filter) arr.push_back(source_name(s));
        j["sources"] = arr;
    }
    return j;
}

Pattern Pattern::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(Errc::MalformedPattern, "pattern must be a JSON object");
    Pattern p;
    p.predicate = j.value("pred", "*");
    if (p.predicate != "*" && !is_identifier(p.predicate))
        throw Error(Errc::MalformedPattern, "bad predicate '" + p.predicate + "'");

    auto term_of = [](const nlohmann::json& v) -> Term {
        if (v.is_string()) {
            std::string s = v.get<std::string>();
            if (!s.empty() && s[0] == '?') {
                if (!is_var_name(s)) throw Error(Errc::MalformedPattern, "bad variable '" + s + "'");
                return Term::variable(s);
            }
        }
        return Term::value(Value::from_json(v));
    };
    if (j.contains("subj")) p.subject = term_of(j["subj"]);
    if (j.contains("obj")) p.object = term_of(j["obj"]);
    if (j.contains("at") && !j["at"].is_null()) p.time_at = parse_timestamp(j["at"].get<std::string>());
    if (j.contains("sources")) {
        std::set<SourceTag> tags;
        for (const auto& s : j["sources"]) tags.insert(source_from_name(s.get<std::string>()));
        p.source_filter = std::move(tags);
    }
    return p;
}

Pattern Pattern::parse(const std::string& text) {
    const std::string t = trim(text);
    const auto open = t.find('(');
    if (open == std::string::npos || t.back() != ')')
        throw Error(Errc::MalformedPattern, "expected Predicate(subject, object) in '" + text + "'");
    const std::string pred = trim(t.substr(0, open));
    if (pred != "*" && !is_identifier(pred))
        throw Error(Errc::MalformedPattern, "bad predicate '" + pred + "'");

    const std::string inner = t.substr(open + 1, t.size() - open - 2);
    // Split on the first top-level comma; quoted strings may contain commas.
    size_t comma = std::string::npos;
    bool in_quote = false;
    for (size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] == '"') in_quote = !in_quote;
        else if (inner[i] == ',' && !in_quote) {
            comma = i;
            break;
        }
    }
    if (comma == std::string::npos)
        throw Error(Errc::MalformedPattern, "expected two terms in '" + text + "'");

    Pattern p;
    p.predicate = pred;
    p.subject = parse_term(inner.substr(0, comma));
    p.object = parse_term(inner.substr(comma + 1));
    if (!p.subject.is_var && !p.subject.constant.is_ident())
        throw Error(Errc::MalformedPattern, "subject must be an identifier or variable");
    return p;
}

} // namespace ctx
