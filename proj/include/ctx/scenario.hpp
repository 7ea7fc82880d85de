#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctx/acquisition.hpp"
#include "ctx/config.hpp"
#include "ctx/reasoner.hpp"

namespace ctx {

// One scripted beat. Offsets are seconds from the script's clock_start and
// must not decrease across steps.
struct ScenarioStep {
    enum class Kind { Emit, UserUpdate, Expect, Query };

    Kind kind = Kind::Emit;
    std::int64_t offset = 0;

    // Emit
    std::string provider_id;
    nlohmann::json payload;
    std::optional<std::int64_t> sequence_no; // explicit override for replay tests

    // UserUpdate
    std::string subject;
    std::string predicate;
    nlohmann::json object;

    // Expect: expected_activity empty means "no activity at all"
    std::string expect_subject;
    std::string expected_activity;
    std::optional<SourceTag> expected_source;
    std::optional<double> expected_confidence; // compared within 1e-9

    // Query
    std::string pattern_text;
    std::vector<std::map<std::string, std::string>> expected_bindings;

    // Emit/UserUpdate: the step passes iff the stack raises this error.
    std::optional<std::string> expect_error;

    static ScenarioStep from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

struct ScenarioScript {
    std::string name;
    Timestamp clock_start = 0;
    std::string note;
    std::vector<ProviderDescriptor> providers;
    std::vector<ScenarioStep> steps;

    // Throws ScriptParse (shape, decreasing offsets, Expect without prior
    // events for the subject) and UnknownProviderInScript.
    static ScenarioScript from_json(const nlohmann::json& j);
    static ScenarioScript load_file(const std::string& path);
    nlohmann::ordered_json to_json() const;
};

// Trace of one executed step: what the stack did and how expectations fared.
struct StepTrace {
    Timestamp sim_time = 0;
    std::string kind;
    nlohmann::ordered_json detail = nlohmann::ordered_json::object();
    std::vector<nlohmann::ordered_json> mutations; // KB notifications, in order
    nlohmann::ordered_json reasoning = nlohmann::ordered_json::object();
    std::optional<bool> pass; // Expect/Query and expect_error steps only
    std::optional<nlohmann::ordered_json> error;

    nlohmann::ordered_json to_json() const;
};

struct ScenarioTrace {
    std::string name;
    bool all_passed = true;
    std::vector<StepTrace> steps;

    nlohmann::ordered_json to_json() const;
    std::string human() const;
};

// Replays a script against a fresh stack over a simulated clock. Within one
// tick, actions apply in script order; poll-mode providers are drained at
// their interval boundaries. Given identical script and config the trace is
// byte-identical across runs.
class ScenarioRunner {
public:
    ScenarioRunner(ScenarioScript script, Ontology ontology, RuleSet rules,
                   MappingRuleSet mapping, const Config& config);

    ScenarioTrace run();

    KnowledgeBase& kb() { return kb_; }
    ReasoningEngine& engine() { return engine_; }

private:
    struct PendingPoll {
        Timestamp due;
        std::string provider_id;
        nlohmann::json payload;
        Timestamp emitted_at;
    };

    void flush_polls(Timestamp now, ScenarioTrace& trace);
    void ingest_now(const std::string& provider_id, const nlohmann::json& payload,
                    Timestamp event_time, std::optional<std::int64_t> seq, StepTrace& st);
    void reason(StepTrace& st);

    ScenarioScript script_;
    Config config_;
    KnowledgeBase kb_;
    AcquisitionModule acquisition_;
    ReasoningEngine engine_;
    std::map<std::string, std::int64_t> next_seq_;
    std::vector<PendingPoll> poll_queue_;
    std::vector<nlohmann::ordered_json> pending_notifications_;
};

// Deterministic event generator for one provider kind: scripted replays and
// seeded fuzz streams share the same shape. Throws UnknownKind.
struct SimProvider {
    ProviderDescriptor descriptor;
    std::uint64_t seed = 0;

    // `count` events starting at `start`, `spacing` seconds apart, sequence
    // numbers 1..count. Same (kind, seed) gives an identical stream.
    std::vector<ProviderEvent> stream(std::size_t count, Timestamp start,
                                      std::int64_t spacing = 60) const;
};

SimProvider make_provider(const std::string& kind, std::uint64_t seed);

} // namespace ctx
