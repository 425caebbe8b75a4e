// agentloop: run tasks, replay trajectories, report metrics and accounting,
// and execute the shipped scenarios.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "agentloop/accounting.hpp"
#include "agentloop/config.hpp"
#include "agentloop/http.hpp"
#include "agentloop/llm_client.hpp"
#include "agentloop/metrics.hpp"
#include "agentloop/protocol.hpp"
#include "agentloop/runtime.hpp"
#include "agentloop/scenario.hpp"
#include "agentloop/tools.hpp"
#include "agentloop/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace agentloop;

namespace {

constexpr int kExitFinish = 0;
constexpr int kExitFailure = 1;
constexpr int kExitForced = 2;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

struct RunOptions {
    std::string task;
    std::string task_file;
    std::string config_path;
    std::string out_dir = "out";
    std::string backend;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_turns;
    std::optional<std::size_t> context_budget;
    std::string judge_endpoint;
    std::string policy;
    std::string judge_policy;
    std::string fixtures;
    std::string clock;
    bool blocking = false;
};

std::unique_ptr<CompletionBackend> make_judge(const RunConfig& config) {
    if (!config.judge_policy_path.empty()) {
        return std::make_unique<ScriptedPolicy>(ScriptedPolicy::from_file(config.judge_policy_path));
    }
    std::string url = config.judge_endpoint;
    if (url.empty()) {
        if (const char* env = std::getenv("JUDGE_ENDPOINT")) url = env;
    }
    if (url.empty()) return nullptr;
    EndpointConfig ec = endpoint_config_from_env();
    ec.url = url;
    ec.model = config.model_name;
    return std::make_unique<EndpointBackend>(ec, make_http_transport());
}

int cmd_run(const RunOptions& o) {
    RunConfig config;
    try {
        if (!o.config_path.empty()) config = load_config_file(o.config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    if (!o.backend.empty()) config.tool_backend = o.backend == "live" ? ToolBackendKind::Live : ToolBackendKind::Fixture;
    if (o.seed) config.seed = *o.seed;
    if (o.max_turns) config.max_turns = *o.max_turns;
    if (o.context_budget) config.context_budget = *o.context_budget;
    if (!o.judge_endpoint.empty()) config.judge_endpoint = o.judge_endpoint;
    if (!o.policy.empty()) config.policy_path = o.policy;
    if (!o.judge_policy.empty()) config.judge_policy_path = o.judge_policy;
    if (!o.fixtures.empty()) config.fixture_path = o.fixtures;
    if (!o.clock.empty()) config.clock = o.clock == "real" ? ClockKind::Real : ClockKind::Simulated;
    if (o.blocking) config.blocking_subthreads = true;

    std::string task = o.task;
    if (!o.task_file.empty()) {
        try {
            task = slurp(o.task_file);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitFailure;
        }
    }
    if (task.find_first_not_of(" \t\r\n") == std::string::npos) {
        std::cerr << "error: no task given (pass the task text or --task-file)\n";
        return kExitFailure;
    }

    const auto problems = validate_config(config, count_tokens(build_prompt(PromptTemplate::Main, {{"user_task", task}})));
    if (!problems.empty()) {
        for (const auto& p : problems) std::cerr << "error: " << p << "\n";
        return kExitFailure;
    }

    std::unique_ptr<ToolBackend> tools;
    if (config.tool_backend == ToolBackendKind::Live) {
        LiveToolConfig lc = live_tool_config_from_env();
        if (lc.search_api_key.empty()) {
            std::cerr << "error: live tool backend needs a search API key; set SEARCH_API_KEY\n";
            return kExitFailure;
        }
        tools = std::make_unique<LiveBackend>(lc, make_http_transport());
    } else {
        const fs::path fixtures = config.fixture_path.empty() ? default_data_dir() / "fixtures" / "corpus.json"
                                                              : fs::path(config.fixture_path);
        try {
            tools = std::make_unique<FixtureBackend>(FixtureBackend::from_file(fixtures));
        } catch (const std::exception& e) {
            std::cerr << "error: cannot load fixtures: " << e.what() << "\n";
            return kExitFailure;
        }
    }

    std::unique_ptr<CompletionBackend> policy;
    std::unique_ptr<CompletionBackend> judge;
    try {
        if (!config.policy_path.empty()) {
            policy = std::make_unique<ScriptedPolicy>(ScriptedPolicy::from_file(config.policy_path));
        } else {
            EndpointConfig ec = endpoint_config_from_env();
            if (!config.model_endpoint.empty()) ec.url = config.model_endpoint;
            if (ec.url.empty()) {
                std::cerr << "error: no model configured; set MODEL_ENDPOINT (or model_endpoint in the config, or --policy)\n";
                return kExitFailure;
            }
            ec.model = config.model_name;
            policy = std::make_unique<EndpointBackend>(ec, make_http_transport());
        }
        judge = make_judge(config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }

    RuntimeDeps deps;
    deps.policy = policy.get();
    deps.tools = tools.get();
    deps.judge = judge.get();
    const RunResult result = run_main(task, config, deps);

    const fs::path out = o.out_dir;
    try {
        fs::create_directories(out);
        const auto records = result.records();
        write_trajectory(out / "trajectory.jsonl", records);
        const auto report = account(records, config.rates);
        spit(out / "accounting.json", accounting_json(report, config.rates));
        spit(out / "report.txt", render_report(report));
        if (result.final_answer) spit(out / "answer.md", *result.final_answer + "\n");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }

    if (result.aborted) {
        std::cerr << "error: run aborted: " << result.abort_reason << " (partial trajectory in " << out.string() << ")\n";
        return kExitFailure;
    }
    std::cout << result.final_answer.value_or("") << "\n";
    if (result.forced) {
        std::cerr << "note: turn limit reached; answer was forced\n";
        return kExitForced;
    }
    return kExitFinish;
}

int cmd_replay(const std::string& path, const std::string& rewrite, bool quiet) {
    LoadResult loaded;
    try {
        loaded = read_trajectory(path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    if (!quiet) std::cout << render_transcript(loaded.steps);
    const auto rec = reconstruct(loaded.steps, count_tokens);
    std::cout << "replayed " << loaded.steps.size() << " records; " << rec.prompts_checked << " prompts rebuilt, "
              << rec.mismatches.size() << " digest mismatches\n";
    for (const auto& m : rec.mismatches) {
        std::cout << "  mismatch: " << m.owner << " turn " << m.turn << " recorded " << m.recorded << " rebuilt "
                  << m.rebuilt << "\n";
    }
    if (!rewrite.empty()) write_trajectory(rewrite, loaded.steps);
    if (loaded.error_line) {
        std::cerr << "error: corrupt record at line " << *loaded.error_line << " (" << loaded.error << "); stopped after "
                  << loaded.steps.size() << " valid records\n";
        return kExitFailure;
    }
    return rec.mismatches.empty() ? kExitFinish : kExitFailure;
}

std::vector<fs::path> trajectory_files(const fs::path& where) {
    std::vector<fs::path> out;
    if (fs::is_regular_file(where)) return {where};
    if (!fs::is_directory(where)) return out;
    for (const auto& e : fs::recursive_directory_iterator(where)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_metrics(const std::string& dir, const std::string& csv, const std::string& task, const std::string& judge_policy,
                const std::string& judge_endpoint) {
    const auto files = trajectory_files(dir);
    std::vector<std::vector<TrajectoryStep>> runs;
    for (const auto& f : files) {
        auto loaded = read_trajectory(f);
        if (loaded.error_line) std::cerr << "warning: " << f.string() << ": corrupt record at line " << *loaded.error_line << "\n";
        runs.push_back(std::move(loaded.steps));
    }
    const auto stats = context_stats(runs);
    for (const auto& w : stats.warnings) std::cerr << "warning: " << w << "\n";
    std::printf("runs: %zu\nchange count: %.2f\navg peak length: %.1f\navg final length: %.1f\nturns: %.2f\n", runs.size(),
                stats.change_count, stats.avg_peak_len, stats.avg_final_len, stats.turns);
    if (!csv.empty()) {
        if (runs.size() == 1) {
            spit(csv, series_csv(stats.runs.front().series));
        } else {
            fs::create_directories(csv);
            for (std::size_t i = 0; i < runs.size(); ++i) {
                spit(fs::path(csv) / (files[i].parent_path().filename().string() + "_" + files[i].stem().string() + ".csv"),
                     series_csv(stats.runs[i].series));
            }
        }
    }
    RunConfig jc;
    jc.judge_policy_path = judge_policy;
    jc.judge_endpoint = judge_endpoint;
    std::unique_ptr<CompletionBackend> judge = make_judge(jc);
    if (!judge) return kExitFinish;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        for (const auto& ev : measure_retention(runs[i], task, *judge, count_tokens)) {
            std::printf("%s %s turn %d: ", std::string(to_string(ev.change.kind)).c_str(), ev.change.thread.c_str(),
                        ev.change.turn);
            if (ev.loss) {
                std::printf("info loss %.4f (%zu of %zu units kept)\n", *ev.loss, ev.matched_units, ev.before_units);
            } else {
                std::printf("%s\n", ev.note.c_str());
            }
        }
    }
    return kExitFinish;
}

int cmd_account(const std::string& dir) {
    const auto files = trajectory_files(dir);
    if (files.empty()) {
        std::cerr << "error: no trajectory files under " << dir << "\n";
        return kExitFailure;
    }
    const RateCard rates;
    for (const auto& f : files) {
        auto loaded = read_trajectory(f);
        std::cout << f.string() << "\n" << render_report(account(loaded.steps, rates)) << "\n";
    }
    return kExitFinish;
}

int cmd_scenario(const std::string& name, bool list, const std::string& out_dir) {
    const auto available = list_scenarios();
    if (list || name.empty()) {
        for (const auto& n : available) std::cout << n << "\n";
        return list ? kExitFinish : kExitFailure;
    }
    Scenario s;
    try {
        s = load_named_scenario(name);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    const auto report = run_scenario(s);
    std::cout << render_scenario_report(report);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        spit(fs::path(out_dir) / "trajectory.jsonl", report.run.trajectory_text);
        const auto acc = account(report.run.result.records(), s.config.rates);
        spit(fs::path(out_dir) / "accounting.json", accounting_json(acc, s.config.rates));
        spit(fs::path(out_dir) / "report.txt", render_report(acc));
        if (report.run.result.final_answer) spit(fs::path(out_dir) / "answer.md", *report.run.result.final_answer + "\n");
    }
    return report.passed() ? kExitFinish : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parallel single-agent runtime with thread control blocks"};
    app.require_subcommand(1, 1);

    RunOptions ro;
    auto* run = app.add_subcommand("run", "Run a task");
    run->add_option("task", ro.task, "Task text");
    run->add_option("--task-file", ro.task_file, "Read the task from a file");
    run->add_option("--config", ro.config_path, "RunConfig JSON file");
    run->add_option("--out", ro.out_dir, "Output directory")->capture_default_str();
    run->add_option("--backend", ro.backend, "Tool backend")->check(CLI::IsMember({"live", "fixture"}));
    run->add_option("--seed", ro.seed, "Seed");
    run->add_option("--max-turns", ro.max_turns, "Main-thread turn limit");
    run->add_option("--context-budget", ro.context_budget, "Context budget in tokens");
    run->add_option("--judge-endpoint", ro.judge_endpoint, "Judge chat-completion endpoint");
    run->add_option("--policy", ro.policy, "Scripted policy file instead of a model endpoint");
    run->add_option("--judge-policy", ro.judge_policy, "Scripted judge policy file");
    run->add_option("--fixtures", ro.fixtures, "Fixture corpus for the fixture backend");
    run->add_option("--clock", ro.clock, "Clock")->check(CLI::IsMember({"simulated", "real"}));
    run->add_flag("--blocking", ro.blocking, "Main thread waits for all subthreads before observing");

    std::string replay_path, rewrite;
    bool quiet = false;
    auto* replay = app.add_subcommand("replay", "Print a trajectory transcript and verify its prompts");
    replay->add_option("path", replay_path, "trajectory.jsonl")->required();
    replay->add_option("--rewrite", rewrite, "Re-serialize the valid records to this path");
    replay->add_flag("--quiet", quiet, "Only print the verification summary");

    std::string metrics_dir, csv, metrics_task, judge_policy, judge_endpoint;
    auto* metrics = app.add_subcommand("metrics", "Context statistics and information retention");
    metrics->add_option("dir", metrics_dir, "Trajectory file or directory")->required();
    metrics->add_option("--csv", csv, "Write per-turn context lengths as CSV");
    metrics->add_option("--task", metrics_task, "Task text for unit extraction");
    metrics->add_option("--judge-policy", judge_policy, "Scripted judge for retention");
    metrics->add_option("--judge-endpoint", judge_endpoint, "Judge endpoint for retention");

    std::string account_dir;
    auto* acct = app.add_subcommand("account", "Time and cost accounting");
    acct->add_option("dir", account_dir, "Trajectory file or directory")->required();

    std::string scenario_name, scenario_out;
    bool list = false;
    auto* scen = app.add_subcommand("scenario", "Run a shipped deterministic scenario");
    scen->add_option("name", scenario_name, "Scenario name");
    scen->add_flag("--list", list, "List scenarios");
    scen->add_option("--out", scenario_out, "Write the scenario's artifacts here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(ro);
        if (*replay) return cmd_replay(replay_path, rewrite, quiet);
        if (*metrics) return cmd_metrics(metrics_dir, csv, metrics_task, judge_policy, judge_endpoint);
        if (*acct) return cmd_account(account_dir);
        if (*scen) return cmd_scenario(scenario_name, list, scenario_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
