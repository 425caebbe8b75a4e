#pragma once

// Scripted, deterministic scenarios loaded from data files, plus the run
// audits used to check their properties.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentloop/llm_client.hpp"
#include "agentloop/model.hpp"
#include "agentloop/runtime.hpp"
#include "agentloop/tools.hpp"

namespace agentloop {

/// Data directory: $AGENTLOOP_DATA_DIR when set, else the source tree's data/.
std::filesystem::path default_data_dir();

struct ScenarioCheck {
    std::string kind;
    nlohmann::json params;
};

struct Scenario {
    std::string name;
    std::string description;
    std::string task;
    RunConfig config;
    ScriptedPolicy policy;
    std::optional<ScriptedPolicy> judge;
    FixtureBackend fixtures;
    std::vector<ScenarioCheck> checks;
};

/// {"name","description","task","config":{...},"fixtures": path | {...},
///  "policy":{"rules":[...]},"judge":{"rules":[...]},"checks":[{"kind",...}]}
/// A relative fixtures path resolves against the scenario file's parent's parent.
Scenario load_scenario(const std::filesystem::path& file);
Scenario load_named_scenario(const std::string& name, const std::filesystem::path& data_dir = default_data_dir());
std::vector<std::string> list_scenarios(const std::filesystem::path& data_dir = default_data_dir());

/// One main-thread or subthread prompt as seen by the model.
struct PromptRecord {
    std::string owner;
    int turn = 0;
    bool forced = false;
    std::size_t tokens = 0;
    std::size_t limit = 0;
    std::size_t header_count = 0;
    std::size_t live_blocks = 0;
    std::size_t registry_size = 0;
    std::size_t running = 0;
};

class PromptAudit final : public RunObserver {
public:
    void on_prompt(const PromptView& view) override;
    const std::vector<PromptRecord>& records() const noexcept { return records_; }

private:
    std::vector<PromptRecord> records_;
};

struct ScenarioRun {
    RunResult result;
    PromptAudit audit;
    std::string trajectory_text;
};

ScenarioRun run_scenario_once(const Scenario& s, bool blocking);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Property checks shared by the scenario runner and the acceptance suite.
CheckResult check_isolation(const RunResult& run);
CheckResult check_tcb_retention(const PromptAudit& audit);
CheckResult check_nesting(const RunResult& run);
CheckResult check_kill_semantics(const RunResult& run, const std::string& thread);
CheckResult check_mailbox_delivery(const RunResult& run);
CheckResult check_termination(const RunResult& run, int max_turns);

struct ScenarioReport {
    std::string name;
    std::vector<CheckResult> checks;
    ScenarioRun run;
    std::optional<ScenarioRun> blocking;
    bool passed() const;
};

/// Runs the scenario, the blocking variant when a check needs it, and a
/// second identical run for the determinism check.
ScenarioReport run_scenario(const Scenario& s);
std::string render_scenario_report(const ScenarioReport& report);

}  // namespace agentloop
