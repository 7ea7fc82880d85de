#pragma once

#include <string>

#include <json.hpp>

namespace ctx {

bool is_identifier(const std::string& s);

// Collapses free text to an identifier: "Out for Conference" -> "OutForConference".
// Returns an empty string when nothing identifier-shaped survives.
std::string camelize(const std::string& s);

// Object position of a fact or pattern: an identifier naming a class or
// individual, or a plain literal (string, number, boolean).
struct Value {
    enum class Kind { Ident, Str, Num, Bool };

    Kind kind = Kind::Ident;
    std::string text; // Ident, Str
    double num = 0.0;
    bool flag = false;

    static Value ident(std::string s) { return {Kind::Ident, std::move(s), 0.0, false}; }
    static Value str(std::string s) { return {Kind::Str, std::move(s), 0.0, false}; }
    static Value number(double v) { return {Kind::Num, {}, v, false}; }
    static Value boolean(bool v) { return {Kind::Bool, {}, 0.0, v}; }

    bool is_ident() const { return kind == Kind::Ident; }

    bool operator==(const Value& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
            case Kind::Ident:
            case Kind::Str: return text == o.text;
            case Kind::Num: return num == o.num;
            case Kind::Bool: return flag == o.flag;
        }
        return false;
    }

    bool operator<(const Value& o) const {
        if (kind != o.kind) return kind < o.kind;
        switch (kind) {
            case Kind::Ident:
            case Kind::Str: return text < o.text;
            case Kind::Num: return num < o.num;
            case Kind::Bool: return flag < o.flag;
        }
        return false;
    }

    std::string display() const;

    // Identifiers serialize as bare strings, string literals as {"str": ...},
    // numbers and booleans as themselves.
    nlohmann::ordered_json to_json() const;
    static Value from_json(const nlohmann::json& j);
};

} // namespace ctx
