#include "ctx/value.hpp"

#include <cctype>

#include "ctx/errors.hpp"

namespace ctx {

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0]))) return false;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (!std::isalnum(u) && c != '_') return false;
    }
    return true;
}

std::string camelize(const std::string& s) {
    std::string out;
    bool upper_next = true;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '_') {
            out.push_back(upper_next && std::isalpha(u) ? static_cast<char>(std::toupper(u)) : c);
            upper_next = false;
        } else {
            upper_next = true;
        }
    }
    if (!is_identifier(out)) return {};
    return out;
}

std::string Value::display() const {
    switch (kind) {
        case Kind::Ident: return text;
        case Kind::Str: return "\"" + text + "\"";
        case Kind::Num: {
            nlohmann::json j = num;
            return j.dump();
        }
        case Kind::Bool: return flag ? "true" : "false";
    }
    return {};
}

nlohmann::ordered_json Value::to_json() const {
    switch (kind) {
        case Kind::Ident: return text;
        case Kind::Str: return nlohmann::ordered_json{{"str", text}};
        case Kind::Num: return num;
        case Kind::Bool: return flag;
    }
    return nullptr;
}

Value Value::from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (is_identifier(s)) return ident(std::move(s));
        return str(std::move(s)); // non-identifier text is a plain literal
    }
    if (j.is_boolean()) return boolean(j.get<bool>());
    if (j.is_number()) return number(j.get<double>());
    if (j.is_object() && j.contains("str") && j["str"].is_string())
        return str(j["str"].get<std::string>());
    throw Error(Errc::ValidationFailed, "object value has unsupported JSON shape: " + j.dump());
}

} // namespace ctx
