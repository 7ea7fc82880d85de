// ctxkernel — command-line front end for the context kernel.
//
//   ctxkernel run <scenario.json>   replay a scripted scenario, print its trace
//   ctxkernel query "<pattern>"     evaluate a pattern against a journal snapshot
//   ctxkernel serve                 host the NDJSON-over-TCP endpoint
//
// Exit codes: 0 success (run: every expectation held), 1 expectation failure,
// 2 configuration or I/O error.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "ctx/config.hpp"
#include "ctx/errors.hpp"
#include "ctx/kb.hpp"
#include "ctx/scenario.hpp"
#include "ctx/server.hpp"
#include "ctx/timeutil.hpp"

namespace {

std::atomic<int> g_signal{0};

void on_signal(int sig) { g_signal.store(sig); }

struct CommonFlags {
    std::string config_path;
    bool strict = false;
    bool lenient = false;
    std::string format = "human";
    std::string listen;
    std::string journal;
};

ctx::Config load_config(const CommonFlags& flags) {
    std::string path = flags.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv(ctx::kConfigEnvVar)) path = env;
    }
    if (path.empty())
        throw ctx::Error(ctx::Errc::ConfigInvalid,
                         std::string("no config file: pass --config or set ") + ctx::kConfigEnvVar);
    ctx::Config cfg = ctx::Config::load_file(path);
    if (flags.strict) cfg.strict = true;
    if (flags.lenient) cfg.strict = false;
    if (!flags.listen.empty()) cfg.listen = flags.listen;
    if (!flags.journal.empty()) cfg.journal_path = flags.journal;
    cfg.validate();
    return cfg;
}

ctx::Ontology build_ontology(const ctx::Config& cfg) {
    ctx::Ontology o = ctx::Ontology::load_upper();
    for (const auto& path : cfg.ontology_docs)
        o = o.plug_domain(ctx::DomainOntologyDoc::load_file(path, cfg.strict));
    return o;
}

int cmd_run(const CommonFlags& flags, const std::string& scenario_path) {
    ctx::Config cfg = load_config(flags);
    ctx::Ontology ontology = build_ontology(cfg);
    ctx::RuleSet rules = ctx::RuleSet::load_file(cfg.rules_path);
    ctx::MappingRuleSet mapping = ctx::MappingRuleSet::load_file(cfg.mapping_path);
    ctx::ScenarioScript script = ctx::ScenarioScript::load_file(scenario_path);

    ctx::ScenarioRunner runner(script, ontology, rules, mapping, cfg);
    ctx::ScenarioTrace trace = runner.run();

    if (flags.format == "json")
        std::cout << trace.to_json().dump(2) << "\n";
    else
        std::cout << trace.human();
    return trace.all_passed ? 0 : 1;
}

int cmd_query(const CommonFlags& flags, const std::string& pattern_text, const std::string& at_text) {
    ctx::Config cfg = load_config(flags);
    if (cfg.journal_path.empty())
        throw ctx::Error(ctx::Errc::ConfigInvalid,
                         "query needs a journal: pass --journal or set \"journal\" in the config");

    ctx::KnowledgeBase kb(build_ontology(cfg), cfg.strict);
    kb.load_journal(cfg.journal_path);

    ctx::Pattern pattern = ctx::Pattern::parse(pattern_text);
    if (!at_text.empty()) pattern.time_at = ctx::parse_timestamp(at_text);

    auto rows = kb.query(pattern);
    if (flags.format == "json") {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const auto& row : rows) {
            nlohmann::ordered_json binding;
            for (const auto& [var, value] : row.binding) binding[var] = value.to_json();
            out.push_back({{"fact", row.fact.to_json()}, {"binding", binding}});
        }
        std::cout << out.dump(2) << "\n";
    } else {
        for (const auto& row : rows) {
            if (row.binding.empty()) {
                std::cout << row.fact.display() << "\n";
                continue;
            }
            std::string line;
            for (const auto& [var, value] : row.binding) {
                if (!line.empty()) line += ", ";
                line += var + "=" + value.display();
            }
            std::cout << line << "\n";
        }
    }
    return 0;
}

int cmd_serve(const CommonFlags& flags) {
    ctx::Config cfg = load_config(flags);
    ctx::Ontology ontology = build_ontology(cfg);
    ctx::RuleSet rules = ctx::RuleSet::load_file(cfg.rules_path);
    ctx::MappingRuleSet mapping = ctx::MappingRuleSet::load_file(cfg.mapping_path);

    // Handlers must be live before the banner: once "listening on" is out,
    // clients may signal us at any moment.
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    ctx::WireServer server(cfg, ontology, rules, mapping);
    server.start();
    std::cout << "listening on " << server.host() << ":" << server.port() << std::endl;
    while (g_signal.load() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(50));

    std::cout << "shutting down" << std::endl;
    server.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"context kernel: context-aware middleware with software sensors"};
    app.require_subcommand(1);

    CommonFlags flags;
    app.add_option("--config", flags.config_path, "path to the kernel config file")
        ->envname(ctx::kConfigEnvVar);
    auto* strict_flag = app.add_flag("--strict", flags.strict, "reject facts that fail ontology validation");
    app.add_flag("--lenient", flags.lenient, "store invalid facts flagged instead of rejecting them")
        ->excludes(strict_flag);
    app.add_option("--format", flags.format, "output format")
        ->check(CLI::IsMember({"human", "json"}))
        ->capture_default_str();
    app.add_option("--listen", flags.listen, "host:port for serve (overrides config)");
    app.add_option("--journal", flags.journal, "journal file (overrides config)");

    auto* run = app.add_subcommand("run", "replay a scenario script against a fresh kernel");
    run->fallthrough(); // global flags may follow the subcommand
    std::string scenario_path;
    run->add_option("scenario", scenario_path, "scenario script (JSON)")->required();

    auto* query = app.add_subcommand("query", "evaluate a pattern against a journal snapshot");
    query->fallthrough();
    std::string pattern_text, at_text;
    query->add_option("pattern", pattern_text, "pattern, e.g. \"Activity(John, ?a)\"")->required();
    query->add_option("--at", at_text, "instant the facts must be valid at (ISO-8601 UTC)");

    auto* serve = app.add_subcommand("serve", "host the NDJSON-over-TCP endpoint");
    serve->fallthrough();

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(flags, scenario_path);
        if (query->parsed()) return cmd_query(flags, pattern_text, at_text);
        if (serve->parsed()) return cmd_serve(flags);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ctx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
