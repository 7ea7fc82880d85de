#include "ctx/kb.hpp"

#include <algorithm>
#include <fstream>

#include "ctx/errors.hpp"

namespace ctx {

KnowledgeBase::KnowledgeBase(Ontology ontology, bool strict)
    : ontology_(std::make_shared<const Ontology>(std::move(ontology))), strict_(strict) {}

void KnowledgeBase::attach_journal(const std::string& path) {
    std::lock_guard lock(mutex_);
    auto out = std::make_unique<std::ofstream>(path, std::ios::app);
    if (!*out) throw Error(Errc::IoError, "cannot open journal '" + path + "'");
    journal_ = std::move(out);
}

void KnowledgeBase::load_journal(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open journal '" + path + "'");
    std::lock_guard lock(mutex_);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::IoError,
                        "journal '" + path + "' line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::string op = rec.value("op", "");
        if (op == "add") {
            add_locked(Fact::from_json(rec.at("fact")), true);
        } else if (op == "delete") {
            delete_locked(rec.at("id").get<FactId>(), true);
        } else if (op == "modify") {
            delete_locked(rec.at("id").get<FactId>(), true);
            add_locked(Fact::from_json(rec.at("fact")), true);
        } else if (op == "flag") {
            auto it = facts_.find(rec.at("id").get<FactId>());
            if (it != facts_.end()) it->second.shadowed = rec.value("shadowed", false);
        } else {
            throw Error(Errc::IoError, "journal '" + path + "' line " + std::to_string(line_no) +
                                           ": unknown op '" + op + "'");
        }
    }
}

void KnowledgeBase::validate_invariants(Fact& f) const {
    if (!is_identifier(f.subject))
        throw Error(Errc::ValidationFailed, "subject '" + f.subject + "' is not an identifier");
    if (!is_identifier(f.predicate))
        throw Error(Errc::ValidationFailed, "predicate '" + f.predicate + "' is not an identifier");
    if (f.object.is_ident() && f.object.text.empty())
        throw Error(Errc::ValidationFailed, "empty object");
    if (f.confidence < 0.0 || f.confidence > 1.0)
        throw Error(Errc::ValidationFailed, "confidence " + std::to_string(f.confidence) + " outside [0,1]");
    if (f.validity.to && *f.validity.to < f.validity.from)
        throw Error(Errc::ClockSkew, "valid_from after valid_to");
    const bool derived = f.source == SourceTag::Scheduled || f.source == SourceTag::Deduced;
    if (derived && f.provider != kReasonerProvider)
        throw Error(Errc::ValidationFailed,
                    "derived source tag requires provider '" + std::string(kReasonerProvider) + "'");
    if (!derived && f.provider == kReasonerProvider)
        throw Error(Errc::ValidationFailed, "base source tag cannot come from the reasoner");

    ValidationResult r = ontology_->validate_fact(f);
    if (!r.ok()) {
        if (strict_) throw Error(Errc::ValidationFailed, r.detail);
        f.flagged = true; // lenient mode keeps noisy facts visible to the reasoner
    }
}

FactId KnowledgeBase::add_fact(Fact f) {
    std::lock_guard lock(mutex_);
    return add_locked(std::move(f), false);
}

FactId KnowledgeBase::add_locked(Fact f, bool from_replay) {
    if (!from_replay) {
        validate_invariants(f);
        f.id = next_fact_id_++;
    } else {
        next_fact_id_ = std::max(next_fact_id_, f.id + 1);
    }
    const FactId id = f.id;
    facts_[id] = f;
    ++mutation_seq_;
    if (journal_)
        journal_append({{"op", "add"}, {"seq", mutation_seq_}, {"fact", f.to_json()}});
    flag_functional_conflicts(f);
    notify({Notification::Kind::Added, f, std::nullopt, mutation_seq_});
    return id;
}

bool KnowledgeBase::delete_fact(FactId id) {
    std::lock_guard lock(mutex_);
    return delete_locked(id, false);
}

bool KnowledgeBase::delete_locked(FactId id, bool) {
    auto it = facts_.find(id);
    if (it == facts_.end()) return false;
    Fact removed = it->second;
    facts_.erase(it);
    ++mutation_seq_;
    if (journal_) journal_append({{"op", "delete"}, {"seq", mutation_seq_}, {"id", id}});
    notify({Notification::Kind::Retracted, removed, std::nullopt, mutation_seq_});
    return true;
}

FactId KnowledgeBase::modify_fact(FactId id, Fact replacement) {
    std::lock_guard lock(mutex_);
    auto it = facts_.find(id);
    if (it == facts_.end()) throw Error(Errc::UnknownFact, "no fact " + std::to_string(id));
    const Fact old = it->second;
    validate_invariants(replacement);
    if (old.equivalent(replacement) && old.flagged == replacement.flagged)
        return id; // no-op modify is suppressed to avoid notification storms

    facts_.erase(it);
    replacement.id = next_fact_id_++;
    facts_[replacement.id] = replacement;
    ++mutation_seq_;
    if (journal_)
        journal_append({{"op", "modify"}, {"seq", mutation_seq_}, {"id", id}, {"fact", replacement.to_json()}});
    flag_functional_conflicts(replacement);

    // One notification covering both versions; patterns matching either see it.
    Notification n{Notification::Kind::Modified, replacement, old, mutation_seq_};
    notify(n);
    return replacement.id;
}

std::vector<QueryResult> KnowledgeBase::query(const Pattern& p) const {
    std::lock_guard lock(mutex_);
    std::vector<QueryResult> out;
    for (const auto& [id, f] : facts_) { // map iteration = fact_id ascending
        if (f.shadowed) continue; // superseded by conflict resolution
        Binding b;
        if (!p.match(f, b)) continue;
        if (p.time_at) {
            if (!f.validity.covers(*p.time_at)) continue;
        } else if (f.validity.to) {
            continue; // no time given: only currently open-ended facts qualify
        }
        out.push_back({id, f, std::move(b)});
    }
    return out;
}

SubId KnowledgeBase::subscribe(Pattern p, Consumer consumer) {
    std::lock_guard lock(mutex_);
    SubId id = next_sub_id_++;
    subscriptions_.push_back({id, std::move(p), std::move(consumer)});
    return id;
}

bool KnowledgeBase::unsubscribe(SubId id) {
    std::lock_guard lock(mutex_);
    auto it = std::find_if(subscriptions_.begin(), subscriptions_.end(),
                           [&](const Subscription& s) { return s.id == id; });
    if (it == subscriptions_.end()) return false;
    subscriptions_.erase(it);
    return true;
}

std::optional<Fact> KnowledgeBase::find(FactId id) const {
    std::lock_guard lock(mutex_);
    auto it = facts_.find(id);
    if (it == facts_.end()) return std::nullopt;
    return it->second;
}

std::vector<Fact> KnowledgeBase::all_facts() const {
    std::lock_guard lock(mutex_);
    std::vector<Fact> out;
    out.reserve(facts_.size());
    for (const auto& [_, f] : facts_) out.push_back(f);
    return out;
}

size_t KnowledgeBase::size() const {
    std::lock_guard lock(mutex_);
    return facts_.size();
}

std::vector<ConflictFlag> KnowledgeBase::take_conflict_flags() {
    std::lock_guard lock(mutex_);
    std::vector<ConflictFlag> out;
    out.swap(pending_conflicts_);
    return out;
}

void KnowledgeBase::set_shadowed(FactId id, bool shadowed) {
    std::lock_guard lock(mutex_);
    auto it = facts_.find(id);
    if (it == facts_.end() || it->second.shadowed == shadowed) return;
    it->second.shadowed = shadowed;
    if (journal_) journal_append({{"op", "flag"}, {"id", id}, {"shadowed", shadowed}});
}

void KnowledgeBase::swap_ontology(Ontology next) {
    std::lock_guard lock(mutex_);
    ontology_ = std::make_shared<const Ontology>(std::move(next));
}

void KnowledgeBase::flag_functional_conflicts(const Fact& stored) {
    const PredicateSig* sig = ontology_->find_predicate(stored.predicate);
    if (!sig || !sig->functional) return;
    ConflictFlag flag{stored.subject, stored.predicate, {}};
    for (const auto& [id, f] : facts_) {
        if (id == stored.id) continue;
        if (f.subject != stored.subject || f.predicate != stored.predicate) continue;
        if (f.object == stored.object) continue;
        if (f.validity.overlaps(stored.validity)) flag.fact_ids.push_back(id);
    }
    if (flag.fact_ids.empty()) return;
    flag.fact_ids.push_back(stored.id);
    std::sort(flag.fact_ids.begin(), flag.fact_ids.end());
    pending_conflicts_.push_back(std::move(flag));
}

void KnowledgeBase::notify(const Notification& n) {
    // Deliver to a snapshot of the subscription list so consumers may
    // unsubscribe (themselves or others) while being notified.
    std::vector<std::pair<SubId, Consumer>> due;
    for (const auto& s : subscriptions_) {
        bool hit = false;
        if (n.kind == Notification::Kind::Modified)
            hit = s.pattern.matches_fact(n.fact) || (n.old && s.pattern.matches_fact(*n.old));
        else
            hit = s.pattern.matches_fact(n.fact);
        if (hit) due.emplace_back(s.id, s.consumer);
    }
    std::vector<SubId> dead;
    for (auto& [id, consumer] : due) {
        bool still_registered =
            std::any_of(subscriptions_.begin(), subscriptions_.end(),
                        [&](const Subscription& s) { return s.id == id; });
        if (!still_registered) continue;
        bool alive = true;
        try {
            alive = consumer(n);
        } catch (...) {
            alive = false;
        }
        if (!alive) dead.push_back(id);
    }
    for (SubId id : dead) unsubscribe(id);
}

void KnowledgeBase::journal_append(const nlohmann::ordered_json& record) {
    *journal_ << record.dump() << '\n';
    journal_->flush();
}

} // namespace ctx
