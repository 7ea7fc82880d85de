#include "ctx/reasoner.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

// Identity used to de-duplicate derivations against stored facts.
std::string statement_key(const Fact& f) {
    std::ostringstream os;
    os << f.subject << '|' << f.predicate << '|' << f.object.display() << '|'
       << f.validity.from << '|';
    if (f.validity.to) os << *f.validity.to;
    return os.str();
}

Value term_value(const Term& t, const Binding& b) {
    if (!t.is_var) return t.constant;
    auto it = b.find(t.var);
    if (it == b.end())
        throw Error(Errc::RuleValidation, "consequent variable " + t.var + " is unbound");
    return it->second;
}

struct Match {
    Binding binding;
    std::vector<FactId> premises;
};

// Depth-first join of the rule's antecedents over `facts`. When `delta` is
// given, the antecedent at `pivot` only matches facts in it.
void join(const Rule& rule, const std::map<FactId, Fact>& facts,
          const std::set<FactId>* delta, int pivot, size_t next, const Match& current,
          std::vector<Match>& out) {
    if (next == rule.antecedents.size()) {
        out.push_back(current);
        return;
    }
    const Pattern& pat = rule.antecedents[next];
    for (const auto& [id, f] : facts) {
        if (static_cast<int>(next) == pivot && delta && !delta->count(id)) continue;
        Match extended = current;
        if (!pat.match(f, extended.binding)) continue;
        extended.premises.push_back(id);
        join(rule, facts, delta, pivot, next + 1, extended, out);
    }
}

std::vector<Match> enumerate_matches(const Rule& rule, const std::map<FactId, Fact>& facts,
                                     const std::set<FactId>* delta) {
    std::vector<Match> out;
    if (!delta) {
        join(rule, facts, nullptr, -1, 0, {}, out);
        return out;
    }
    // Semi-naive restriction: a match found in round n must use at least one
    // fact added in round n-1. Pivoting every antecedent position covers all
    // such matches; duplicates are harmless because derivations de-duplicate
    // by statement.
    for (size_t pivot = 0; pivot < rule.antecedents.size(); ++pivot)
        join(rule, facts, delta, static_cast<int>(pivot), 0, {}, out);
    return out;
}

// Antecedent a functional-update rule rewrites: same predicate and subject
// term as the consequent, different object. Mirrors Rule::is_functional_update.
int self_antecedent(const Rule& r) {
    for (size_t i = 0; i < r.antecedents.size(); ++i) {
        const Pattern& a = r.antecedents[i];
        if (a.predicate == r.consequent.predicate && a.subject == r.consequent.subject &&
            !(a.object == r.consequent.object))
            return static_cast<int>(i);
    }
    return -1;
}

} // namespace

ReasoningEngine::ReasoningEngine(RuleSet rules) : rules_(std::move(rules)) {
    for (const Rule& r : rules_.rules) {
        r.validate();
        if (r.kind == Rule::Kind::ConflictResolution)
            merge_rules_.push_back(r);
        else if (r.is_functional_update())
            update_rules_.push_back(r);
        else
            inference_rules_.push_back(r);
    }
}

bool ReasoningEngine::beats(const Fact& a, const Fact& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (source_precedence(a.source) != source_precedence(b.source))
        return source_precedence(a.source) > source_precedence(b.source);
    if (a.validity.from != b.validity.from) return a.validity.from > b.validity.from;
    return a.id < b.id;
}

bool ReasoningEngine::fact_defined_pure(const Fact& f) const {
    if (is_base_source(f.source)) return f.source == SourceTag::Defined;
    auto it = pureness_.find(f.id);
    if (it != pureness_.end()) return it->second;
    // Unknown derived fact (journal replay): its tag already encodes the
    // classification it earned when first derived.
    return f.source == SourceTag::Scheduled;
}

void ReasoningEngine::forget(FactId id) {
    supports_.erase(id);
    pureness_.erase(id);
}

void ReasoningEngine::validate_rules(const Ontology& ontology) const {
    for (const Rule& r : rules_.rules) {
        for (const Pattern& a : r.antecedents)
            if (!ontology.find_predicate(a.predicate))
                throw Error(Errc::RuleValidation,
                            "rule '" + r.id + "' matches unknown predicate " + a.predicate);
        if (!ontology.find_predicate(r.consequent.predicate))
            throw Error(Errc::RuleValidation,
                        "rule '" + r.id + "' derives unknown predicate " + r.consequent.predicate);
    }
}

std::vector<Derivation> ReasoningEngine::infer(KnowledgeBase& kb) {
    std::vector<Derivation> out;

    std::map<FactId, Fact> active;            // join candidates (not shadowed)
    std::map<std::string, FactId> statements; // every stored fact
    for (const Fact& f : kb.all_facts()) {
        statements.emplace(statement_key(f), f.id);
        if (!f.shadowed) active.emplace(f.id, f);
    }

    std::set<FactId> delta;
    bool first_round = true;
    size_t rounds = 0;
    while (true) {
        const size_t bound = rules_.rules.size() * active.size() * active.size() + 8;
        if (++rounds > bound)
            throw Error(Errc::NonTermination,
                        "inference still growing after " + std::to_string(bound) + " rounds");

        std::set<FactId> next_delta;
        for (const Rule& rule : inference_rules_) {
            for (const Match& m :
                 enumerate_matches(rule, active, first_round ? nullptr : &delta)) {
                std::optional<Interval> validity = active.at(m.premises.front()).validity;
                double min_conf = 1.0;
                bool pure = true;
                for (FactId pid : m.premises) {
                    const Fact& p = active.at(pid);
                    if (pid != m.premises.front())
                        validity = validity ? Interval::intersect(*validity, p.validity)
                                            : std::nullopt;
                    min_conf = std::min(min_conf, p.confidence);
                    pure = pure && fact_defined_pure(p);
                }
                if (!validity) continue; // premises never hold at the same time

                Value subj = term_value(rule.consequent.subject, m.binding);
                if (!subj.is_ident()) continue; // subjects are identifiers

                Fact derived;
                derived.subject = subj.text;
                derived.predicate = rule.consequent.predicate;
                derived.object = term_value(rule.consequent.object, m.binding);
                derived.validity = *validity;
                derived.source = pure ? SourceTag::Scheduled : SourceTag::Deduced;
                derived.confidence = rule.factor * min_conf;
                derived.provider = kReasonerProvider;

                Support support{rule.id, m.premises, derived.confidence, pure};

                auto existing = statements.find(statement_key(derived));
                if (existing != statements.end()) {
                    // Already stated. Base facts need no support; derived facts
                    // gain an alternative one (first support fixed the fact).
                    FactId eid = existing->second;
                    auto stored = kb.find(eid);
                    if (!stored || is_base_source(stored->source)) continue;
                    auto& sups = supports_[eid];
                    bool known = false;
                    for (const Support& s : sups)
                        known = known || (s.rule_id == support.rule_id &&
                                          s.premises == support.premises);
                    if (!known) sups.push_back(support);
                    if (!pureness_.count(eid))
                        pureness_[eid] = stored->source == SourceTag::Scheduled;
                    continue;
                }

                FactId id = kb.add_fact(derived);
                derived.id = id;
                statements.emplace(statement_key(derived), id);
                active.emplace(id, derived);
                next_delta.insert(id);
                supports_[id] = {support};
                pureness_[id] = pure;
                out.push_back({id, derived, rule.id, m.premises, derived.source,
                               derived.confidence});
            }
        }
        if (next_delta.empty()) break;
        delta = std::move(next_delta);
        first_round = false;
    }
    return out;
}

std::vector<UpdateApplication> ReasoningEngine::apply_functional_updates(KnowledgeBase& kb) {
    std::vector<UpdateApplication> out;
    bool changed = true;
    while (changed) {
        changed = false;
        if (out.size() > update_rules_.size() * kb.size() + 8)
            throw Error(Errc::NonTermination, "functional update rules oscillate");
        for (const Rule& rule : update_rules_) {
            int self = self_antecedent(rule);
            if (self < 0) continue;

            std::map<FactId, Fact> active;
            for (const Fact& f : kb.all_facts())
                if (!f.shadowed) active.emplace(f.id, f);

            for (const Match& m : enumerate_matches(rule, active, nullptr)) {
                const Fact& target = active.at(m.premises[static_cast<size_t>(self)]);
                Value next_object = term_value(rule.consequent.object, m.binding);
                if (target.object == next_object) continue;

                // Rewrite in place: the fact keeps its source, confidence,
                // provider and validity. Only the object moves.
                Fact replacement = target;
                replacement.object = next_object;
                FactId new_id = kb.modify_fact(target.id, replacement);
                out.push_back({rule.id, target.id, new_id, m.premises});

                if (supports_.count(target.id)) {
                    // A derived fact was revised: from here on its life is
                    // tied to the other premises of the update rule.
                    Support s;
                    s.rule_id = rule.id;
                    for (size_t i = 0; i < m.premises.size(); ++i)
                        if (static_cast<int>(i) != self) s.premises.push_back(m.premises[i]);
                    s.confidence = replacement.confidence;
                    s.defined_pure = replacement.source == SourceTag::Scheduled;
                    forget(target.id);
                    supports_[new_id] = {s};
                    pureness_[new_id] = s.defined_pure;
                }
                changed = true;
                break; // the KB moved under us: re-enumerate
            }
            if (changed) break;
        }
    }
    return out;
}

void ReasoningEngine::reconcile_shadows(KnowledgeBase& kb) {
    auto facts = kb.all_facts();

    // Resolutions whose winner has left the KB release their victims.
    std::set<FactId> owned;
    for (auto it = shadow_registry_.begin(); it != shadow_registry_.end();) {
        if (!kb.find(it->first)) {
            for (FactId v : it->second)
                if (kb.find(v)) kb.set_shadowed(v, false);
            it = shadow_registry_.erase(it);
            continue;
        }
        for (FactId v : it->second) owned.insert(v);
        ++it;
    }

    // A journal replay restores shadow flags but not the resolutions that set
    // them. Re-attach each orphaned shadow to the live fact superseding it, or
    // release it when nothing does.
    auto better_owner = [](const Fact& a, const Fact& b) {
        if (a.canonical != b.canonical) return a.canonical;
        return beats(a, b);
    };
    for (const Fact& f : facts) {
        if (!f.shadowed || owned.count(f.id)) continue;
        const Fact* owner = nullptr;
        for (const Fact& g : facts) {
            if (g.id == f.id || g.shadowed) continue;
            if (g.subject != f.subject || g.predicate != f.predicate) continue;
            if (!g.validity.overlaps(f.validity)) continue;
            if (!owner || better_owner(g, *owner)) owner = &g;
        }
        if (owner) {
            shadow_registry_[owner->id].push_back(f.id);
            owned.insert(f.id);
        } else {
            kb.set_shadowed(f.id, false);
        }
    }

    // Replayed merge outputs regain their support: the facts they shadow.
    for (const Fact& f : facts) {
        if (!f.canonical || supports_.count(f.id)) continue;
        auto reg = shadow_registry_.find(f.id);
        if (reg == shadow_registry_.end() || reg->second.empty()) continue; // stale: swept later
        supports_[f.id] = {
            {std::string{}, reg->second, f.confidence, f.source == SourceTag::Scheduled}};
        pureness_[f.id] = f.source == SourceTag::Scheduled;
    }
}

std::vector<FactId> ReasoningEngine::sweep(KnowledgeBase& kb) {
    // Winners that vanished release their victims before groundedness runs.
    for (auto it = shadow_registry_.begin(); it != shadow_registry_.end();) {
        if (kb.find(it->first)) {
            ++it;
            continue;
        }
        for (FactId v : it->second)
            if (kb.find(v)) kb.set_shadowed(v, false);
        it = shadow_registry_.erase(it);
    }

    auto facts = kb.all_facts();
    std::set<FactId> present;
    std::set<FactId> grounded;
    for (const Fact& f : facts) {
        present.insert(f.id);
        if (is_base_source(f.source)) grounded.insert(f.id);
    }

    // Least fixpoint: a derived fact is grounded when some support rests
    // entirely on grounded facts. Cyclic mutual support never qualifies.
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& [id, sups] : supports_) {
            if (!present.count(id) || grounded.count(id)) continue;
            for (const Support& s : sups) {
                bool ok = !s.premises.empty();
                for (FactId p : s.premises)
                    if (!grounded.count(p)) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    grounded.insert(id);
                    changed = true;
                    break;
                }
            }
        }
    }

    std::vector<FactId> removed;
    for (const Fact& f : facts) {
        if (is_base_source(f.source) || grounded.count(f.id)) continue;
        kb.delete_fact(f.id);
        forget(f.id);
        removed.push_back(f.id);
    }

    // Drop records for facts that left the KB outside our control.
    for (auto it = supports_.begin(); it != supports_.end();) {
        if (present.count(it->first) &&
            std::find(removed.begin(), removed.end(), it->first) == removed.end()) {
            ++it;
        } else {
            pureness_.erase(it->first);
            it = supports_.erase(it);
        }
    }
    return removed;
}

std::vector<FactId> ReasoningEngine::retract_derivations(KnowledgeBase& kb, FactId removed_id) {
    forget(removed_id);
    return sweep(kb);
}

std::vector<Conflict> ReasoningEngine::detect_conflicts(const KnowledgeBase& kb) const {
    std::vector<Conflict> out;
    std::map<std::pair<std::string, std::string>, std::vector<Fact>> groups;
    for (const Fact& f : kb.all_facts()) {
        if (f.shadowed) continue;
        const PredicateSig* sig = kb.ontology().find_predicate(f.predicate);
        if (!sig || !sig->functional) continue;
        groups[{f.subject, f.predicate}].push_back(f);
    }

    for (const auto& [key, members] : groups) {
        if (members.size() < 2) continue;

        // Maximal pairwise-overlapping sets of intervals all contain some
        // interval's start, so anchoring on each start finds every one.
        std::vector<std::vector<FactId>> cliques;
        for (const Fact& anchor : members) {
            std::vector<FactId> clique;
            std::set<Value> objects;
            for (const Fact& g : members) {
                if (!g.validity.covers(anchor.validity.from)) continue;
                clique.push_back(g.id); // members are id-ordered, so clique is too
                objects.insert(g.object);
            }
            if (clique.size() < 2 || objects.size() < 2) continue;
            cliques.push_back(std::move(clique));
        }

        for (size_t i = 0; i < cliques.size(); ++i) {
            bool keep = true;
            for (size_t j = 0; j < cliques.size() && keep; ++j) {
                if (i == j) continue;
                bool subset = std::includes(cliques[j].begin(), cliques[j].end(),
                                            cliques[i].begin(), cliques[i].end());
                if (subset && (cliques[j].size() > cliques[i].size() || j < i)) keep = false;
            }
            if (keep) out.push_back({key.first, key.second, cliques[i]});
        }
    }
    return out;
}

Resolution ReasoningEngine::resolve_conflict(const KnowledgeBase& kb, const Conflict& c) const {
    if (c.contenders.size() < 2)
        throw Error(Errc::EmptyConflict, "a conflict needs at least two facts");

    std::vector<Fact> contenders;
    for (FactId id : c.contenders) {
        auto f = kb.find(id);
        if (!f)
            throw Error(Errc::UnknownFact, "conflict names missing fact " + std::to_string(id));
        contenders.push_back(*f);
    }

    // Stage 1: a resolution rule whose antecedent objects equal the
    // contenders' objects exactly merges them into one canonical fact.
    std::set<Value> objects;
    for (const Fact& f : contenders) objects.insert(f.object);

    for (const Rule& rule : merge_rules_) {
        bool applicable = !rule.antecedents.empty();
        std::set<Value> rule_objects;
        for (const Pattern& a : rule.antecedents) {
            if (a.predicate != c.predicate || a.object.is_var ||
                !(a.subject == rule.antecedents.front().subject)) {
                applicable = false;
                break;
            }
            if (!a.subject.is_var && !(a.subject.constant == Value::ident(c.subject))) {
                applicable = false;
                break;
            }
            rule_objects.insert(a.object.constant);
        }
        if (!applicable || rule_objects != objects) continue;

        std::optional<Interval> validity = contenders.front().validity;
        double min_conf = 1.0;
        bool pure = true;
        for (const Fact& f : contenders) {
            if (f.id != contenders.front().id)
                validity = validity ? Interval::intersect(*validity, f.validity) : std::nullopt;
            min_conf = std::min(min_conf, f.confidence);
            pure = pure && fact_defined_pure(f);
        }
        if (!validity) continue; // cannot happen for pairwise-overlapping facts

        Binding binding;
        if (rule.antecedents.front().subject.is_var)
            binding[rule.antecedents.front().subject.var] = Value::ident(c.subject);

        Fact merged;
        Value subj = term_value(rule.consequent.subject, binding);
        if (!subj.is_ident()) continue;
        merged.subject = subj.text;
        merged.predicate = rule.consequent.predicate;
        merged.object = term_value(rule.consequent.object, binding);
        merged.validity = *validity;
        merged.source = pure ? SourceTag::Scheduled : SourceTag::Deduced;
        merged.confidence = rule.factor * min_conf;
        merged.provider = kReasonerProvider;
        merged.canonical = true;

        Resolution r;
        r.policy = Resolution::Policy::MergeRule;
        r.rule_id = rule.id;
        r.canonical = merged;
        r.contender_ids = c.contenders;
        r.shadowed_ids = c.contenders;
        return r;
    }

    // Stage 2: precedence.
    const Fact* winner = &contenders.front();
    for (const Fact& f : contenders)
        if (beats(f, *winner)) winner = &f;

    Resolution r;
    r.policy = Resolution::Policy::Precedence;
    r.canonical = *winner;
    r.contender_ids = c.contenders;
    for (FactId id : c.contenders)
        if (id != winner->id) r.shadowed_ids.push_back(id);
    return r;
}

std::optional<CurrentActivity> ReasoningEngine::current_activity(const KnowledgeBase& kb,
                                                                 const std::string& subject,
                                                                 Timestamp at) const {
    Pattern p;
    p.predicate = kActivityPredicate;
    p.subject = Term::value(Value::ident(subject));
    p.object = Term::variable("?a");
    p.time_at = at;

    auto rows = kb.query(p);
    if (rows.empty()) return std::nullopt;
    const Fact* best = &rows.front().fact;
    for (const auto& row : rows)
        if (beats(row.fact, *best)) best = &row.fact;
    return CurrentActivity{best->object, best->confidence, best->source};
}

ReasoningEngine::RunReport ReasoningEngine::run(KnowledgeBase& kb) {
    RunReport report;
    reconcile_shadows(kb);

    size_t passes = 0;
    while (true) {
        if (++passes > 100)
            throw Error(Errc::NonTermination, "reasoning did not quiesce after 100 passes");
        bool changed = false;

        auto derivations = infer(kb);
        changed = changed || !derivations.empty();
        report.derivations.insert(report.derivations.end(), derivations.begin(),
                                  derivations.end());

        auto updates = apply_functional_updates(kb);
        changed = changed || !updates.empty();
        report.updates.insert(report.updates.end(), updates.begin(), updates.end());

        auto removed = sweep(kb);
        changed = changed || !removed.empty();
        report.retracted.insert(report.retracted.end(), removed.begin(), removed.end());

        for (const Conflict& c : detect_conflicts(kb)) {
            report.conflicts.push_back(c);
            Resolution res = resolve_conflict(kb, c);

            if (res.policy == Resolution::Policy::MergeRule) {
                FactId cid = 0;
                for (const Fact& f : kb.all_facts())
                    if (f.canonical && f.same_statement(res.canonical)) {
                        cid = f.id;
                        break;
                    }
                if (cid == 0) cid = kb.add_fact(res.canonical);
                res.canonical.id = cid;
                supports_[cid] = {{res.rule_id, res.contender_ids, res.canonical.confidence,
                                   res.canonical.source == SourceTag::Scheduled}};
                pureness_[cid] = res.canonical.source == SourceTag::Scheduled;
            }

            auto& victims = shadow_registry_[res.canonical.id];
            for (FactId id : res.shadowed_ids) {
                kb.set_shadowed(id, true);
                if (std::find(victims.begin(), victims.end(), id) == victims.end())
                    victims.push_back(id);
            }
            report.resolutions.push_back(res);
            changed = true;
        }

        kb.take_conflict_flags(); // the scan above supersedes insertion-time flags

        if (!changed) break;
    }
    return report;
}

} // namespace ctx
