#include "ctx/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

#include "ctx/errors.hpp"
#include "ctx/fact.hpp"

namespace ctx {

namespace {

const std::set<std::string> kUpperChildren = {"Entity", "Location", "Time", "Activity"};

void require_identifier(const std::string& s, const char* what) {
    if (!is_identifier(s))
        throw Error(Errc::DuplicateName, std::string(what) + " '" + s + "' is not a valid identifier");
}

} // namespace

DomainOntologyDoc DomainOntologyDoc::from_json(const nlohmann::json& j, bool strict) {
    if (!j.is_object()) throw Error(Errc::ScriptParse, "domain ontology document must be a JSON object");
    if (strict) {
        static const std::set<std::string> known = {"layer", "classes", "predicates", "individuals"};
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!known.count(it.key()))
                throw Error(Errc::ScriptParse, "unknown key '" + it.key() + "' in domain ontology document");
    }
    DomainOntologyDoc doc;
    doc.layer_id = j.value("layer", "");
    for (const auto& c : j.value("classes", nlohmann::json::array())) {
        std::pair<std::string, std::vector<std::string>> entry;
        entry.first = c.value("name", "");
        for (const auto& p : c.value("parents", nlohmann::json::array()))
            entry.second.push_back(p.get<std::string>());
        doc.classes.push_back(std::move(entry));
    }
    for (const auto& p : j.value("predicates", nlohmann::json::array())) {
        PredicateSig sig;
        sig.name = p.value("name", "");
        sig.domain = p.value("domain", "");
        sig.range = p.value("range", "");
        sig.functional = p.value("functional", false);
        doc.predicates.push_back(std::move(sig));
    }
    for (const auto& i : j.value("individuals", nlohmann::json::array()))
        doc.individuals.emplace_back(i.value("name", ""), i.value("class", ""));
    return doc;
}

DomainOntologyDoc DomainOntologyDoc::load_file(const std::string& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open ontology document '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ScriptParse, "bad JSON in '" + path + "': " + e.what());
    }
    return from_json(j, strict);
}

nlohmann::ordered_json DomainOntologyDoc::to_json() const {
    nlohmann::ordered_json j;
    j["layer"] = layer_id;
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& [name, parents] : classes)
        j["classes"].push_back({{"name", name}, {"parents", parents}});
    j["predicates"] = nlohmann::ordered_json::array();
    for (const auto& p : predicates)
        j["predicates"].push_back(
            {{"name", p.name}, {"domain", p.domain}, {"range", p.range}, {"functional", p.functional}});
    j["individuals"] = nlohmann::ordered_json::array();
    for (const auto& [name, cls] : individuals)
        j["individuals"].push_back({{"name", name}, {"class", cls}});
    return j;
}

Ontology Ontology::load_upper() {
    Ontology o;
    o.parents_[kRootClass] = {};
    Layer upper;
    upper.classes.insert(kRootClass);
    for (const auto& c : kUpperChildren) {
        o.parents_[c] = {kRootClass};
        upper.classes.insert(c);
    }
    o.layers_[kUpperLayer] = std::move(upper);
    return o;
}

Ontology Ontology::plug_domain(const DomainOntologyDoc& doc) const {
    require_identifier(doc.layer_id, "layer id");
    if (layers_.count(doc.layer_id))
        throw Error(Errc::DuplicateLayer, "layer '" + doc.layer_id + "' is already plugged");

    Ontology next = *this;
    Layer layer;

    std::set<std::string> doc_classes;
    for (const auto& [name, parents] : doc.classes) {
        require_identifier(name, "class");
        if (next.parents_.count(name) || next.individuals_.count(name) || !doc_classes.insert(name).second)
            throw Error(Errc::DuplicateName, "class '" + name + "' already exists");
        if (parents.empty())
            throw Error(Errc::UnknownAttachmentClass,
                        "class '" + name + "' declares no parent to attach under");
    }

    for (const auto& [name, parents] : doc.classes) {
        std::set<std::string> pset;
        for (const auto& p : parents) {
            if (!doc_classes.count(p) && !parents_.count(p))
                throw Error(Errc::UnknownAttachmentClass,
                            "class '" + name + "' names unknown parent '" + p + "'");
            if (p == kRootClass)
                throw Error(Errc::UnknownAttachmentClass,
                            "class '" + name + "' must attach under Entity, Location, Time or Activity, not Context");
            pset.insert(p);
        }
        next.parents_[name] = std::move(pset);
        layer.classes.insert(name);
    }

    for (const auto& sig : doc.predicates) {
        require_identifier(sig.name, "predicate");
        if (next.predicates_.count(sig.name))
            throw Error(Errc::DuplicateName, "predicate '" + sig.name + "' already exists");
        if (!next.parents_.count(sig.domain))
            throw Error(Errc::UnknownAttachmentClass,
                        "predicate '" + sig.name + "' has unknown domain '" + sig.domain + "'");
        if (sig.range != kLiteralRange && !next.parents_.count(sig.range))
            throw Error(Errc::UnknownAttachmentClass,
                        "predicate '" + sig.name + "' has unknown range '" + sig.range + "'");
        next.predicates_[sig.name] = sig;
        layer.predicates.insert(sig.name);
    }

    for (const auto& [name, cls] : doc.individuals) {
        require_identifier(name, "individual");
        if (next.parents_.count(name) || next.individuals_.count(name))
            throw Error(Errc::DuplicateName, "individual '" + name + "' already exists");
        if (!next.parents_.count(cls))
            throw Error(Errc::UnknownAttachmentClass,
                        "individual '" + name + "' has unknown class '" + cls + "'");
        next.individuals_[name] = cls;
        layer.individuals.insert(name);
    }

    next.layers_[doc.layer_id] = std::move(layer);
    next.check_acyclic_and_rooted();
    return next;
}

Ontology Ontology::unplug_domain(const std::string& layer_id) const {
    if (layer_id == kUpperLayer)
        throw Error(Errc::UpperLayerImmutable, "the upper layer cannot be unplugged");
    auto it = layers_.find(layer_id);
    if (it == layers_.end())
        throw Error(Errc::UnknownLayer, "no layer '" + layer_id + "'");
    const Layer& victim = it->second;

    // Another layer depends on us if any of its edges, signatures or
    // individuals reference a class owned by the victim layer.
    std::set<std::string> dependents;
    for (const auto& [other_id, other] : layers_) {
        if (other_id == layer_id) continue;
        bool depends = false;
        for (const auto& c : other.classes)
            for (const auto& p : parents_.at(c))
                if (victim.classes.count(p)) depends = true;
        for (const auto& pname : other.predicates) {
            const auto& sig = predicates_.at(pname);
            if (victim.classes.count(sig.domain) || victim.classes.count(sig.range)) depends = true;
        }
        for (const auto& iname : other.individuals)
            if (victim.classes.count(individuals_.at(iname))) depends = true;
        if (depends) dependents.insert(other_id);
    }
    if (!dependents.empty()) {
        std::string list;
        for (const auto& d : dependents) list += (list.empty() ? "" : ", ") + d;
        throw Error(Errc::DanglingDependents, "layers still referencing '" + layer_id + "': " + list);
    }

    Ontology next = *this;
    for (const auto& c : victim.classes) next.parents_.erase(c);
    for (const auto& p : victim.predicates) next.predicates_.erase(p);
    for (const auto& i : victim.individuals) next.individuals_.erase(i);
    next.layers_.erase(layer_id);
    return next;
}

bool Ontology::is_subclass(const std::string& a, const std::string& b) const {
    if (!parents_.count(a)) throw Error(Errc::UnknownClass, "no class '" + a + "'");
    if (!parents_.count(b)) throw Error(Errc::UnknownClass, "no class '" + b + "'");
    if (a == b) return true;
    std::vector<const std::string*> stack{&a};
    std::set<std::string> seen{a};
    while (!stack.empty()) {
        const std::string& cur = *stack.back();
        stack.pop_back();
        for (const auto& p : parents_.at(cur)) {
            if (p == b) return true;
            if (seen.insert(p).second) stack.push_back(&parents_.find(p)->first);
        }
    }
    return false;
}

const PredicateSig* Ontology::find_predicate(const std::string& name) const {
    auto it = predicates_.find(name);
    return it == predicates_.end() ? nullptr : &it->second;
}

std::optional<std::string> Ontology::class_of(const std::string& name) const {
    if (auto it = individuals_.find(name); it != individuals_.end()) return it->second;
    if (parents_.count(name)) return name;
    return std::nullopt;
}

ValidationResult Ontology::validate_fact(const Fact& f) const {
    const PredicateSig* sig = find_predicate(f.predicate);
    if (!sig)
        return {ValidationResult::Code::UnknownPredicate, "no predicate '" + f.predicate + "'"};

    auto subj_class = class_of(f.subject);
    if (!subj_class)
        return {ValidationResult::Code::DomainViolation,
                "subject '" + f.subject + "' has no declared class"};
    if (!is_subclass(*subj_class, sig->domain))
        return {ValidationResult::Code::DomainViolation,
                "subject '" + f.subject + "' of class '" + *subj_class + "' is not a '" + sig->domain + "'"};

    if (sig->range == kLiteralRange) return ValidationResult::pass();
    if (!f.object.is_ident())
        return {ValidationResult::Code::RangeViolation,
                "predicate '" + f.predicate + "' expects a '" + sig->range + "', got literal " + f.object.display()};
    auto obj_class = class_of(f.object.text);
    if (!obj_class)
        return {ValidationResult::Code::RangeViolation,
                "object '" + f.object.text + "' has no declared class"};
    if (!is_subclass(*obj_class, sig->range))
        return {ValidationResult::Code::RangeViolation,
                "object '" + f.object.text + "' of class '" + *obj_class + "' is not a '" + sig->range + "'"};
    return ValidationResult::pass();
}

std::vector<std::string> Ontology::class_names() const {
    std::vector<std::string> out;
    out.reserve(parents_.size());
    for (const auto& [name, _] : parents_) out.push_back(name);
    return out;
}

void Ontology::check_acyclic_and_rooted() const {
    // Kahn-style topological check: peel classes whose parents are all
    // peeled, starting from the root.
    std::map<std::string, std::set<std::string>> children;
    for (const auto& [c, ps] : parents_)
        for (const auto& p : ps) children[p].insert(c);

    std::vector<std::string> queue;
    std::map<std::string, size_t> remaining;
    for (const auto& [c, ps] : parents_) {
        remaining[c] = ps.size();
        if (ps.empty()) queue.push_back(c);
    }
    std::set<std::string> peeled;
    while (!queue.empty()) {
        std::string cur = queue.back();
        queue.pop_back();
        peeled.insert(cur);
        for (const auto& ch : children[cur])
            if (--remaining[ch] == 0) queue.push_back(ch);
    }
    if (peeled.size() != parents_.size()) {
        for (const auto& [c, ps] : parents_)
            if (!peeled.count(c))
                throw Error(Errc::CycleIntroduced, "class '" + c + "' participates in a subclass cycle");
    }
    for (const auto& [c, ps] : parents_)
        if (c != kRootClass && ps.empty())
            throw Error(Errc::UnknownAttachmentClass, "class '" + c + "' is detached from the hierarchy");
}

} // namespace ctx
