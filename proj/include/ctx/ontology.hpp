#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctx/value.hpp"

namespace ctx {

struct Fact;

// Range of a predicate is either a class name or the pseudo-class "Literal",
// which places no constraint on the object.
inline constexpr const char* kLiteralRange = "Literal";
inline constexpr const char* kUpperLayer = "upper";
inline constexpr const char* kRootClass = "Context";

struct PredicateSig {
    std::string name;
    std::string domain;
    std::string range;
    bool functional = false;

    bool operator==(const PredicateSig&) const = default;
};

// One pluggable low-level ontology layer, parsed from a JSON document.
struct DomainOntologyDoc {
    std::string layer_id;
    // class -> direct parents; parents may name classes in this doc or
    // classes already plugged into the target ontology.
    std::vector<std::pair<std::string, std::vector<std::string>>> classes;
    std::vector<PredicateSig> predicates;
    std::vector<std::pair<std::string, std::string>> individuals; // name -> class

    static DomainOntologyDoc from_json(const nlohmann::json& j, bool strict = true);
    static DomainOntologyDoc load_file(const std::string& path, bool strict = true);
    nlohmann::ordered_json to_json() const;
};

struct ValidationResult {
    enum class Code { Ok, UnknownPredicate, DomainViolation, RangeViolation };
    Code code = Code::Ok;
    std::string detail;

    bool ok() const { return code == Code::Ok; }
    static ValidationResult pass() { return {}; }
};

// Immutable class hierarchy plus predicate signatures and typed individuals.
// Mutating operations return a new value; instances are safe to share.
class Ontology {
public:
    struct Layer {
        std::set<std::string> classes;
        std::set<std::string> predicates;
        std::set<std::string> individuals;

        bool operator==(const Layer&) const = default;
    };

    // The fixed upper layer: Context with Entity, Location, Time, Activity.
    static Ontology load_upper();

    Ontology plug_domain(const DomainOntologyDoc& doc) const;
    Ontology unplug_domain(const std::string& layer_id) const;

    bool has_class(const std::string& name) const { return parents_.count(name) != 0; }
    bool has_layer(const std::string& id) const { return layers_.count(id) != 0; }

    // Reflexive-transitive subclass reachability. Throws UnknownClass.
    bool is_subclass(const std::string& a, const std::string& b) const;

    const PredicateSig* find_predicate(const std::string& name) const;
    // Declared class of an individual, or the class itself when `name` is a
    // class (classes act as their own instances in fact positions).
    std::optional<std::string> class_of(const std::string& name) const;

    ValidationResult validate_fact(const Fact& f) const;

    const std::map<std::string, std::set<std::string>>& classes() const { return parents_; }
    const std::map<std::string, PredicateSig>& predicates() const { return predicates_; }
    const std::map<std::string, std::string>& individuals() const { return individuals_; }
    const std::map<std::string, Layer>& layers() const { return layers_; }

    std::vector<std::string> class_names() const;

    bool operator==(const Ontology&) const = default;

private:
    std::map<std::string, std::set<std::string>> parents_; // class -> direct parents
    std::map<std::string, PredicateSig> predicates_;
    std::map<std::string, std::string> individuals_;
    std::map<std::string, Layer> layers_;

    void check_acyclic_and_rooted() const;
};

} // namespace ctx
