#include "ctx/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "ctx/errors.hpp"

namespace ctx {

namespace {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                         const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok)
            throw Error(Errc::ScriptParse,
                        std::string(what) + " has unknown key '" + it.key() + "'");
    }
}

nlohmann::ordered_json notification_json(const Notification& n) {
    nlohmann::ordered_json j;
    j["kind"] = Notification::kind_name(n.kind);
    j["seq"] = n.seq;
    j["fact"] = n.fact.to_json();
    if (n.old) j["old"] = n.old->to_json();
    return j;
}

std::string binding_value_text(const Value& v) { return v.display(); }

} // namespace

ScenarioStep ScenarioStep::from_json(const nlohmann::json& j) {
    ScenarioStep s;
    std::string kind = j.at("do").get<std::string>();
    s.offset = j.at("offset").get<std::int64_t>();

    if (kind == "emit") {
        reject_unknown_keys(j, {"do", "offset", "provider", "payload", "seq", "expect_error"},
                            "emit step");
        s.kind = Kind::Emit;
        s.provider_id = j.at("provider").get<std::string>();
        s.payload = j.at("payload");
        if (j.contains("seq")) s.sequence_no = j.at("seq").get<std::int64_t>();
        if (j.contains("expect_error")) s.expect_error = j.at("expect_error").get<std::string>();
    } else if (kind == "user_update") {
        reject_unknown_keys(j, {"do", "offset", "subject", "pred", "obj", "expect_error"},
                            "user_update step");
        s.kind = Kind::UserUpdate;
        s.subject = j.at("subject").get<std::string>();
        s.predicate = j.at("pred").get<std::string>();
        s.object = j.at("obj");
        if (j.contains("expect_error")) s.expect_error = j.at("expect_error").get<std::string>();
    } else if (kind == "expect") {
        reject_unknown_keys(j, {"do", "offset", "subject", "activity", "source", "confidence"},
                            "expect step");
        s.kind = Kind::Expect;
        s.expect_subject = j.at("subject").get<std::string>();
        if (!j.at("activity").is_null()) s.expected_activity = j.at("activity").get<std::string>();
        if (j.contains("source"))
            s.expected_source = source_from_name(j.at("source").get<std::string>());
        if (j.contains("confidence")) s.expected_confidence = j.at("confidence").get<double>();
    } else if (kind == "query") {
        reject_unknown_keys(j, {"do", "offset", "pattern", "expect"}, "query step");
        s.kind = Kind::Query;
        s.pattern_text = j.at("pattern").get<std::string>();
        for (const auto& row : j.at("expect")) {
            std::map<std::string, std::string> binding;
            for (auto it = row.begin(); it != row.end(); ++it)
                binding[it.key()] = it.value().get<std::string>();
            s.expected_bindings.push_back(std::move(binding));
        }
    } else {
        throw Error(Errc::ScriptParse, "unknown step kind '" + kind + "'");
    }
    return s;
}

nlohmann::ordered_json ScenarioStep::to_json() const {
    nlohmann::ordered_json j;
    switch (kind) {
        case Kind::Emit:
            j["do"] = "emit";
            j["offset"] = offset;
            j["provider"] = provider_id;
            j["payload"] = payload;
            if (sequence_no) j["seq"] = *sequence_no;
            if (expect_error) j["expect_error"] = *expect_error;
            break;
        case Kind::UserUpdate:
            j["do"] = "user_update";
            j["offset"] = offset;
            j["subject"] = subject;
            j["pred"] = predicate;
            j["obj"] = object;
            if (expect_error) j["expect_error"] = *expect_error;
            break;
        case Kind::Expect:
            j["do"] = "expect";
            j["offset"] = offset;
            j["subject"] = expect_subject;
            j["activity"] = expected_activity.empty()
                                ? nlohmann::ordered_json(nullptr)
                                : nlohmann::ordered_json(expected_activity);
            if (expected_source) j["source"] = source_name(*expected_source);
            if (expected_confidence) j["confidence"] = *expected_confidence;
            break;
        case Kind::Query: {
            j["do"] = "query";
            j["offset"] = offset;
            j["pattern"] = pattern_text;
            auto rows = nlohmann::ordered_json::array();
            for (const auto& b : expected_bindings) rows.push_back(b);
            j["expect"] = rows;
            break;
        }
    }
    return j;
}

ScenarioScript ScenarioScript::from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"name", "clock_start", "note", "providers", "steps"}, "scenario");
    ScenarioScript s;
    try {
        s.name = j.at("name").get<std::string>();
        s.clock_start = parse_timestamp(j.at("clock_start").get<std::string>());
        s.note = j.value("note", std::string{});
        for (const auto& p : j.at("providers"))
            s.providers.push_back(ProviderDescriptor::from_json(p));
        for (const auto& step : j.at("steps")) s.steps.push_back(ScenarioStep::from_json(step));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(Errc::ScriptParse, e.what());
    }

    std::set<std::string> declared;
    for (const auto& p : s.providers) declared.insert(p.provider_id);

    std::int64_t prev_offset = 0;
    std::set<std::string> seen_subjects;
    bool first = true;
    for (const ScenarioStep& step : s.steps) {
        if (!first && step.offset < prev_offset)
            throw Error(Errc::ScriptParse, "step offsets decrease at offset " +
                                               std::to_string(step.offset));
        prev_offset = step.offset;
        first = false;

        if (step.kind == ScenarioStep::Kind::Emit) {
            if (!declared.count(step.provider_id))
                throw Error(Errc::UnknownProviderInScript,
                            "step emits via undeclared provider '" + step.provider_id + "'");
            for (const auto& field : step.payload.items())
                if (field.value().is_string()) {
                    std::string raw = field.value().get<std::string>();
                    seen_subjects.insert(is_identifier(raw) ? raw : camelize(raw));
                }
        } else if (step.kind == ScenarioStep::Kind::UserUpdate) {
            seen_subjects.insert(is_identifier(step.subject) ? step.subject
                                                             : camelize(step.subject));
        } else if (step.kind == ScenarioStep::Kind::Expect) {
            if (!seen_subjects.count(step.expect_subject))
                throw Error(Errc::ScriptParse, "expect step asks about '" + step.expect_subject +
                                                   "' before any event mentions it");
        }
    }
    return s;
}

ScenarioScript ScenarioScript::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open scenario file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ScriptParse, "scenario file " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json ScenarioScript::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["clock_start"] = format_timestamp(clock_start);
    if (!note.empty()) j["note"] = note;
    auto provs = nlohmann::ordered_json::array();
    for (const auto& p : providers) provs.push_back(p.to_json());
    j["providers"] = provs;
    auto st = nlohmann::ordered_json::array();
    for (const auto& s : steps) st.push_back(s.to_json());
    j["steps"] = st;
    return j;
}

nlohmann::ordered_json StepTrace::to_json() const {
    nlohmann::ordered_json j;
    j["time"] = format_timestamp(sim_time);
    j["step"] = kind;
    j["detail"] = detail;
    if (!mutations.empty()) j["mutations"] = mutations;
    if (!reasoning.empty()) j["reasoning"] = reasoning;
    if (pass) j["verdict"] = *pass ? "pass" : "fail";
    if (error) j["error"] = *error;
    return j;
}

nlohmann::ordered_json ScenarioTrace::to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = name;
    j["passed"] = all_passed;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : steps) arr.push_back(s.to_json());
    j["steps"] = arr;
    return j;
}

std::string ScenarioTrace::human() const {
    std::string out = "scenario: " + name + "\n";
    for (const StepTrace& s : steps) {
        out += format_timestamp(s.sim_time) + "  " + s.kind;
        if (s.pass) out += *s.pass ? "  PASS" : "  FAIL";
        out += "\n";
        if (!s.detail.empty()) out += "    " + s.detail.dump() + "\n";
        if (s.error) out += "    error: " + s.error->dump() + "\n";
        for (const auto& m : s.mutations) out += "    ~ " + m.dump() + "\n";
        if (!s.reasoning.empty()) out += "    reasoning: " + s.reasoning.dump() + "\n";
    }
    out += all_passed ? "result: all expectations pass\n" : "result: FAILED expectations\n";
    return out;
}

ScenarioRunner::ScenarioRunner(ScenarioScript script, Ontology ontology, RuleSet rules,
                               MappingRuleSet mapping, const Config& config)
    : script_(std::move(script)),
      config_(config),
      kb_(std::move(ontology), config.strict),
      acquisition_(kb_, std::move(mapping)),
      engine_(std::move(rules)) {
    engine_.validate_rules(kb_.ontology());
    if (!config_.journal_path.empty()) kb_.attach_journal(config_.journal_path);

    for (ProviderDescriptor d : script_.providers) {
        if (!d.confidence_explicit) d.default_confidence = config_.confidence_for(d.default_source);
        acquisition_.register_provider(d);
        next_seq_[d.provider_id] = 0;
    }

    kb_.subscribe(Pattern{}, [this](const Notification& n) {
        pending_notifications_.push_back(notification_json(n));
        return true;
    });
}

void ScenarioRunner::ingest_now(const std::string& provider_id, const nlohmann::json& payload,
                                Timestamp event_time, std::optional<std::int64_t> seq,
                                StepTrace& st) {
    std::int64_t use = seq ? *seq : next_seq_[provider_id] + 1;
    ProviderEvent e;
    e.provider_id = provider_id;
    e.event_time = event_time;
    e.payload = payload;
    e.sequence_no = use;
    std::vector<FactId> ids = acquisition_.ingest(e);
    next_seq_[provider_id] = std::max(next_seq_[provider_id], use);

    auto facts = nlohmann::ordered_json::array();
    for (FactId id : ids)
        if (auto f = kb_.find(id)) facts.push_back(f->to_json());
    st.detail["facts"] = facts;
}

void ScenarioRunner::reason(StepTrace& st) {
    auto report = engine_.run(kb_);
    nlohmann::ordered_json r;
    if (!report.derivations.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const Derivation& d : report.derivations)
            arr.push_back({{"rule", d.rule_id},
                           {"fact", d.derived_fact.to_json()},
                           {"premises", d.premise_ids}});
        r["derived"] = arr;
    }
    if (!report.updates.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const UpdateApplication& u : report.updates)
            arr.push_back({{"rule", u.rule_id},
                           {"old_fact", u.old_fact_id},
                           {"new_fact", u.new_fact_id},
                           {"premises", u.premise_ids}});
        r["updates"] = arr;
    }
    if (!report.retracted.empty()) r["retracted"] = report.retracted;
    if (!report.conflicts.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const Conflict& c : report.conflicts)
            arr.push_back(
                {{"subject", c.subject}, {"predicate", c.predicate}, {"facts", c.contenders}});
        r["conflicts"] = arr;
    }
    if (!report.resolutions.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const Resolution& res : report.resolutions) {
            nlohmann::ordered_json rj;
            rj["policy"] =
                res.policy == Resolution::Policy::MergeRule ? "merge_rule" : "precedence";
            if (!res.rule_id.empty()) rj["rule"] = res.rule_id;
            rj["canonical"] = res.canonical.to_json();
            rj["shadowed"] = res.shadowed_ids;
            arr.push_back(rj);
        }
        r["resolutions"] = arr;
    }
    st.reasoning = r;
}

void ScenarioRunner::flush_polls(Timestamp now, ScenarioTrace& trace) {
    std::vector<PendingPoll> due;
    auto it = poll_queue_.begin();
    while (it != poll_queue_.end()) {
        if (it->due <= now) {
            due.push_back(*it);
            it = poll_queue_.erase(it);
        } else {
            ++it;
        }
    }
    if (due.empty()) return;
    std::stable_sort(due.begin(), due.end(),
                     [](const PendingPoll& a, const PendingPoll& b) { return a.due < b.due; });

    size_t i = 0;
    while (i < due.size()) {
        Timestamp tick = due[i].due;
        StepTrace st;
        st.sim_time = tick;
        st.kind = "poll";
        auto drained = nlohmann::ordered_json::array();
        while (i < due.size() && due[i].due == tick) {
            try {
                ingest_now(due[i].provider_id, due[i].payload, tick, std::nullopt, st);
                drained.push_back({{"provider", due[i].provider_id},
                                   {"emitted_at", format_timestamp(due[i].emitted_at)}});
            } catch (const Error& e) {
                st.error = {{"code", errc_name(e.code())}, {"detail", e.detail()}};
                st.pass = false;
            }
            ++i;
        }
        st.detail["drained"] = drained;
        reason(st);
        st.mutations = std::move(pending_notifications_);
        pending_notifications_.clear();
        if (st.pass && !*st.pass) trace.all_passed = false;
        trace.steps.push_back(std::move(st));
    }
}

ScenarioTrace ScenarioRunner::run() {
    ScenarioTrace trace;
    trace.name = script_.name;

    for (const ScenarioStep& step : script_.steps) {
        Timestamp now = script_.clock_start + step.offset;
        flush_polls(now, trace);

        StepTrace st;
        st.sim_time = now;

        switch (step.kind) {
            case ScenarioStep::Kind::Emit: {
                st.kind = "emit";
                st.detail["provider"] = step.provider_id;
                st.detail["payload"] = step.payload;
                auto d = acquisition_.provider(step.provider_id);
                try {
                    if (d && d->mode == ProviderDescriptor::Mode::Poll) {
                        std::int64_t interval = d->poll_interval.value_or(1);
                        std::int64_t elapsed = now - script_.clock_start;
                        std::int64_t k = (elapsed + interval - 1) / interval;
                        Timestamp due = script_.clock_start + k * interval;
                        poll_queue_.push_back({due, step.provider_id, step.payload, now});
                        st.detail["queued_until"] = format_timestamp(due);
                    } else {
                        ingest_now(step.provider_id, step.payload, now, step.sequence_no, st);
                        reason(st);
                    }
                    if (step.expect_error) st.pass = false; // the error never came
                } catch (const Error& e) {
                    st.error = {{"code", errc_name(e.code())}, {"detail", e.detail()}};
                    st.pass = step.expect_error && *step.expect_error == errc_name(e.code());
                }
                break;
            }
            case ScenarioStep::Kind::UserUpdate: {
                st.kind = "user_update";
                st.detail["subject"] = step.subject;
                st.detail["pred"] = step.predicate;
                st.detail["obj"] = step.object;
                try {
                    FactId id = acquisition_.user_update(step.subject, step.predicate,
                                                         normalize_object(step.object), now);
                    if (auto f = kb_.find(id)) st.detail["fact"] = f->to_json();
                    reason(st);
                    if (step.expect_error) st.pass = false;
                } catch (const Error& e) {
                    st.error = {{"code", errc_name(e.code())}, {"detail", e.detail()}};
                    st.pass = step.expect_error && *step.expect_error == errc_name(e.code());
                }
                break;
            }
            case ScenarioStep::Kind::Expect: {
                st.kind = "expect";
                st.detail["subject"] = step.expect_subject;
                st.detail["expected"] =
                    step.expected_activity.empty()
                        ? nlohmann::ordered_json(nullptr)
                        : nlohmann::ordered_json(step.expected_activity);
                auto actual = engine_.current_activity(kb_, step.expect_subject, now);
                if (actual) {
                    st.detail["actual"] = {{"activity", actual->object.display()},
                                           {"confidence", actual->confidence},
                                           {"source", source_name(actual->source)}};
                } else {
                    st.detail["actual"] = nullptr;
                }
                bool ok;
                if (step.expected_activity.empty()) {
                    ok = !actual.has_value();
                } else {
                    ok = actual.has_value() &&
                         actual->object.display() == step.expected_activity;
                    if (ok && step.expected_source) ok = actual->source == *step.expected_source;
                    if (ok && step.expected_confidence)
                        ok = std::abs(actual->confidence - *step.expected_confidence) <= 1e-9;
                }
                st.pass = ok;
                break;
            }
            case ScenarioStep::Kind::Query: {
                st.kind = "query";
                st.detail["pattern"] = step.pattern_text;
                try {
                    Pattern p = Pattern::parse(step.pattern_text);
                    p.time_at = now;
                    auto rows = kb_.query(p);
                    std::vector<std::map<std::string, std::string>> got;
                    auto actual = nlohmann::ordered_json::array();
                    for (const QueryResult& r : rows) {
                        std::map<std::string, std::string> b;
                        for (const auto& [var, val] : r.binding)
                            b[var] = binding_value_text(val);
                        actual.push_back(b);
                        got.push_back(std::move(b));
                    }
                    st.detail["actual"] = actual;
                    st.pass = got == step.expected_bindings;
                } catch (const Error& e) {
                    st.error = {{"code", errc_name(e.code())}, {"detail", e.detail()}};
                    st.pass = false;
                }
                break;
            }
        }

        st.mutations = std::move(pending_notifications_);
        pending_notifications_.clear();
        if (st.pass && !*st.pass) trace.all_passed = false;
        trace.steps.push_back(std::move(st));
    }

    // Poll events queued past the last step still drain; nothing is dropped.
    flush_polls(std::numeric_limits<Timestamp>::max(), trace);
    return trace;
}

SimProvider make_provider(const std::string& kind, std::uint64_t seed) {
    if (std::find(kProviderKinds.begin(), kProviderKinds.end(), kind) == kProviderKinds.end())
        throw Error(Errc::UnknownKind, "no simulated provider for kind '" + kind + "'");
    SimProvider p;
    p.descriptor.provider_id = kind + "_sim";
    p.descriptor.kind = kind;
    p.descriptor.default_source = SourceTag::Sensed;
    p.descriptor.default_confidence = 0.9;
    p.seed = seed;
    return p;
}

std::vector<ProviderEvent> SimProvider::stream(std::size_t count, Timestamp start,
                                               std::int64_t spacing) const {
    static const std::vector<std::string> users = {"John", "Jim", "Kim"};
    static const std::vector<std::string> rooms = {"Office", "Lab", "Hall"};
    static const std::vector<std::string> class_kinds = {"Class", "Seminar"};
    static const std::vector<std::string> entries = {"Personal", "Conference", "ProjectReview"};
    static const std::vector<std::string> topics = {"Meeting", "DiscussingOnProject",
                                                    "Presenting"};
    static const std::vector<std::string> conditions = {"Snowing", "Raining", "Sunny", "Cloudy",
                                                        "Windy"};
    static const std::vector<std::string> roles = {"Lecturer", "Student", "Researcher"};
    static const std::vector<std::string> targets = {"Flight", "Hotel", "Paper"};

    std::mt19937_64 rng(seed);
    auto pick = [&rng](const std::vector<std::string>& v) -> const std::string& {
        return v[static_cast<size_t>(rng() % v.size())];
    };

    std::vector<ProviderEvent> out;
    for (std::size_t i = 0; i < count; ++i) {
        ProviderEvent e;
        e.provider_id = descriptor.provider_id;
        e.event_time = start + static_cast<Timestamp>(i) * spacing;
        e.sequence_no = static_cast<std::int64_t>(i) + 1;
        nlohmann::json p;
        if (descriptor.kind == "timetable") {
            p["user"] = pick(users);
            p["room"] = pick(rooms);
            p["activity"] = pick(class_kinds);
            p["slot_start"] = format_timestamp(e.event_time);
            p["slot_end"] = format_timestamp(e.event_time + 7200);
        } else if (descriptor.kind == "calendar") {
            p["user"] = pick(users);
            p["entry"] = pick(entries);
            p["valid_from"] = format_timestamp(e.event_time);
            p["valid_to"] = format_timestamp(e.event_time + 4 * 3600);
        } else if (descriptor.kind == "email") {
            p["from"] = pick(users);
            p["to"] = pick(users);
            p["topic"] = pick(topics);
            p["meeting_time"] = format_timestamp(e.event_time + 3600);
        } else if (descriptor.kind == "weather") {
            p["condition"] = pick(conditions);
        } else if (descriptor.kind == "profile") {
            p["user"] = pick(users);
            p["role"] = pick(roles);
        } else { // generic
            p["user"] = pick(users);
            p["target"] = pick(targets);
        }
        e.payload = std::move(p);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace ctx
