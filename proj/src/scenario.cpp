#include "agentloop/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "agentloop/config.hpp"
#include "agentloop/metrics.hpp"
#include "agentloop/protocol.hpp"
#include "agentloop/trajectory_io.hpp"

#ifndef AGENTLOOP_DATA_DIR
#define AGENTLOOP_DATA_DIR "data"
#endif

namespace agentloop {

using nlohmann::json;

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("AGENTLOOP_DATA_DIR"); env && *env) return env;
    return AGENTLOOP_DATA_DIR;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t count_occurrences(const std::string& hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& file) {
    const json doc = json::parse(slurp(file));
    Scenario s;
    s.name = doc.value("name", file.stem().string());
    s.description = doc.value("description", "");
    s.task = doc.at("task").get<std::string>();
    if (doc.contains("config")) s.config = load_config_text(doc.at("config").dump());
    s.policy = ScriptedPolicy::from_json_text(doc.at("policy").dump());
    if (doc.contains("judge")) s.judge = ScriptedPolicy::from_json_text(doc.at("judge").dump());
    if (doc.contains("fixtures")) {
        const auto& f = doc.at("fixtures");
        if (f.is_string()) {
            std::filesystem::path p = f.get<std::string>();
            if (p.is_relative()) p = file.parent_path().parent_path() / p;
            s.fixtures = FixtureBackend::from_file(p);
        } else {
            s.fixtures = FixtureBackend::from_json_text(f.dump());
        }
    }
    for (const auto& c : doc.value("checks", json::array())) s.checks.push_back({c.at("kind").get<std::string>(), c});
    return s;
}

std::vector<std::string> list_scenarios(const std::filesystem::path& data_dir) {
    std::vector<std::string> out;
    const auto dir = data_dir / "scenarios";
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

Scenario load_named_scenario(const std::string& name, const std::filesystem::path& data_dir) {
    const auto file = data_dir / "scenarios" / (name + ".json");
    if (!std::filesystem::exists(file)) {
        std::string avail;
        for (const auto& n : list_scenarios(data_dir)) avail += (avail.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown scenario '" + name + "'; available: " + avail);
    }
    return load_scenario(file);
}

void PromptAudit::on_prompt(const PromptView& view) {
    PromptRecord r;
    r.owner = view.owner;
    r.turn = view.turn;
    r.forced = view.forced;
    r.tokens = view.window->total_tokens();
    r.limit = view.compression_limit;
    const std::string text = serialize_prompt(view.window->messages());
    r.header_count = count_occurrences(text, kTcbListHeader);
    r.live_blocks = count_live_tcb_blocks(view.window->messages());
    r.registry_size = view.registry.size();
    r.running = static_cast<std::size_t>(std::count_if(view.registry.begin(), view.registry.end(), [](const Tcb& t) {
        return t.state == ThreadState::Running;
    }));
    records_.push_back(r);
}

ScenarioRun run_scenario_once(const Scenario& s, bool blocking) {
    ScenarioRun run;
    RunConfig config = s.config;
    config.blocking_subthreads = blocking;
    config.clock = ClockKind::Simulated;
    RuntimeDeps deps;
    deps.policy = &s.policy;
    deps.tools = &s.fixtures;
    deps.judge = s.judge ? &*s.judge : nullptr;
    deps.observer = &run.audit;
    run.result = run_main(s.task, config, deps);
    run.trajectory_text = serialize_trajectory(run.result.records());
    return run;
}

CheckResult check_isolation(const RunResult& run) {
    CheckResult c{"isolation", true, ""};
    std::size_t violations = 0;
    for (std::size_t i = 1; i < run.windows.size(); ++i) {
        const auto& w = run.windows[i];
        const std::string me = w.owner().name();
        std::string transcript;
        for (const auto& m : w.messages()) {
            transcript += m.content;
            transcript += '\n';
            if (m.provenance != me) ++violations;
        }
        if (transcript.find(kTcbListHeader) != std::string::npos) ++violations;
        // Text produced by any other thread must not show up here unless
        // this thread produced the identical text itself.
        std::set<std::string> own;
        for (const auto& m : w.messages()) {
            if (m.role == Role::Assistant) own.insert(m.content);
        }
        for (std::size_t j = 0; j < run.windows.size(); ++j) {
            if (j == i) continue;
            for (const auto& m : run.windows[j].messages()) {
                if (m.role != Role::Assistant || m.content.size() < 16 || own.contains(m.content)) continue;
                if (transcript.find(m.content) != std::string::npos) ++violations;
            }
        }
    }
    c.pass = violations == 0;
    c.detail = std::to_string(run.windows.size() > 0 ? run.windows.size() - 1 : 0) + " subthread windows, " +
               std::to_string(violations) + " provenance violations";
    return c;
}

CheckResult check_tcb_retention(const PromptAudit& audit) {
    CheckResult c{"tcb_retention", true, ""};
    bool rendered = false;
    std::size_t checked = 0;
    for (const auto& r : audit.records()) {
        if (r.owner != kMainOwner) continue;
        ++checked;
        const std::size_t expected = rendered || r.registry_size > 0 ? 1 : 0;
        if (r.header_count != expected || r.live_blocks != expected) {
            c.pass = false;
            c.detail = "main turn " + std::to_string(r.turn) + " has " + std::to_string(r.header_count) +
                       " TCB blocks, expected " + std::to_string(expected);
            return c;
        }
        if (r.header_count > 0) rendered = true;
    }
    c.detail = std::to_string(checked) + " main prompts checked";
    return c;
}

CheckResult check_nesting(const RunResult& run) {
    CheckResult c{"nesting", true, ""};
    std::size_t attempts = 0;
    for (const auto& t : run.subthreads) {
        for (const auto& s : t.steps) {
            for (const auto& e : s.events) {
                if (e.kind == EventKind::Spawn || e.kind == EventKind::Kill || e.kind == EventKind::Delete) {
                    c.pass = false;
                    c.detail = t.owner + " mutated the registry at turn " + std::to_string(s.turn);
                    return c;
                }
            }
            if (s.act_kind == "branch" || s.act_kind == "kill" || s.act_kind == "delete" || s.act_kind == "sleep") {
                ++attempts;
                if (s.observation.find(permission_denied_text(s.act_kind)) == std::string::npos) {
                    c.pass = false;
                    c.detail = t.owner + " " + s.act_kind + " was not refused";
                    return c;
                }
            }
        }
    }
    std::size_t spawns = 0;
    for (const auto& s : run.main.steps) {
        spawns += static_cast<std::size_t>(
            std::count_if(s.events.begin(), s.events.end(), [](const StepEvent& e) { return e.kind == EventKind::Spawn; }));
    }
    if (spawns != run.tcbs.size()) {
        c.pass = false;
        c.detail = "registry holds blocks the main thread never spawned";
        return c;
    }
    c.detail = std::to_string(attempts) + " subthread thread-operation attempts, all refused";
    return c;
}

CheckResult check_kill_semantics(const RunResult& run, const std::string& thread) {
    CheckResult c{"kill_semantics", false, ""};
    const auto tcb = std::find_if(run.tcbs.begin(), run.tcbs.end(), [&](const Tcb& t) { return t.id.str() == thread; });
    if (tcb == run.tcbs.end()) {
        c.detail = "no thread " + thread;
        return c;
    }
    if (tcb->state != ThreadState::Killed) {
        c.detail = thread + " ended " + std::string(to_string(tcb->state));
        return c;
    }
    if (tcb->result) {
        c.detail = thread + " kept a result";
        return c;
    }
    for (const auto& p : run.posted) {
        if (p.id == thread) {
            c.detail = thread + " posted a result";
            return c;
        }
    }
    const std::string rendered = render_tcb(*tcb, run.makespan);
    if (rendered.find("Result:") != std::string::npos) {
        c.detail = "rendered TCB has a Result line";
        return c;
    }
    bool shown = false;
    for (const auto& s : run.main.steps) {
        if (s.observation.find("Thread ID: " + thread + "\n") == std::string::npos) continue;
        const auto at = s.observation.find("Thread ID: " + thread + "\n");
        const auto block_end = s.observation.find("\n\nThread ID: ", at + 1);
        const std::string block = s.observation.substr(at, block_end == std::string::npos ? std::string::npos : block_end - at);
        if (block.find("Status: Killed") != std::string::npos) {
            shown = true;
            if (block.find("Result:") != std::string::npos) {
                c.detail = "observed TCB carries a Result line";
                return c;
            }
        }
    }
    if (!shown) {
        c.detail = "no main observation shows " + thread + " as Killed";
        return c;
    }
    c.pass = true;
    c.detail = thread + " Killed, no result posted, no Result line";
    return c;
}

CheckResult check_mailbox_delivery(const RunResult& run) {
    CheckResult c{"mailbox_delivery", true, ""};
    for (const auto& tcb : run.tcbs) {
        if (tcb.state == ThreadState::Killed) {
            for (const auto& p : run.posted) {
                if (p.id == tcb.id.str()) {
                    c.pass = false;
                    c.detail = tcb.id.str() + " was killed but posted";
                    return c;
                }
            }
            continue;
        }
        if (tcb.state != ThreadState::Successful || !tcb.end_time) continue;
        std::vector<const TrajectoryStep*> carrying;
        const TrajectoryStep* first_after = nullptr;
        for (const auto& s : run.main.steps) {
            for (const auto& e : s.events) {
                if (e.kind == EventKind::Inject && e.thread == tcb.id.str()) carrying.push_back(&s);
            }
            if (!first_after && !s.observation.empty() && s.sim_time_end > *tcb.end_time) first_after = &s;
        }
        if (carrying.size() > 1) {
            c.pass = false;
            c.detail = tcb.id.str() + " injected " + std::to_string(carrying.size()) + " times";
            return c;
        }
        if (first_after && (carrying.empty() || carrying[0]->sim_time_end > first_after->sim_time_end)) {
            c.pass = false;
            c.detail = tcb.id.str() + " not injected into the earliest observation after completion";
            return c;
        }
    }
    c.detail = std::to_string(run.posted.size()) + " posted results delivered once";
    return c;
}

CheckResult check_termination(const RunResult& run, int max_turns) {
    CheckResult c{"termination", run.main.steps.size() <= static_cast<std::size_t>(max_turns) + 1, ""};
    c.detail = std::to_string(run.main.steps.size()) + " main completions, limit " + std::to_string(max_turns + 1);
    return c;
}

bool ScenarioReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

namespace {

CheckResult run_check(const ScenarioCheck& chk, const Scenario& s, const ScenarioRun& run,
                      const std::optional<ScenarioRun>& blocking) {
    const RunResult& r = run.result;
    const json& p = chk.params;
    CheckResult c{chk.kind, false, ""};
    if (chk.kind == "exit") {
        const std::string want = p.value("status", "finish");
        const std::string got = r.aborted ? "failure" : r.forced ? "forced" : "finish";
        c.pass = want == got;
        c.detail = "exit status " + got;
    } else if (chk.kind == "answer_contains") {
        const std::string answer = r.final_answer.value_or("");
        c.pass = true;
        std::vector<std::string> missing;
        for (const auto& t : p.at("text")) {
            if (answer.find(t.get<std::string>()) == std::string::npos) missing.push_back(t.get<std::string>());
        }
        c.pass = missing.empty() && r.final_answer.has_value();
        c.detail = missing.empty() ? "answer contains all expected results" : "answer lacks '" + missing.front() + "'";
    } else if (chk.kind == "injected_before_finish") {
        std::size_t n = 0;
        for (const auto& st : r.main.steps) {
            n += static_cast<std::size_t>(std::count_if(st.events.begin(), st.events.end(),
                                                        [](const StepEvent& e) { return e.kind == EventKind::Inject; }));
        }
        const std::size_t want = p.at("count").get<std::size_t>();
        c.pass = n == want && r.final_answer.has_value();
        c.detail = std::to_string(n) + " results injected before finish, expected " + std::to_string(want);
    } else if (chk.kind == "async_faster_than_blocking") {
        const double a = r.makespan;
        const double b = blocking ? blocking->result.makespan : 0.0;
        c.pass = blocking && a < b;
        c.detail = "async makespan " + fmt("%.3f", a) + " s, blocking makespan " + fmt("%.3f", b) + " s";
    } else if (chk.kind == "running_after_branch") {
        const std::size_t k = p.at("k").get<std::size_t>();
        int branch_turn = -1;
        for (const auto& st : r.main.steps) {
            if (st.act_kind == "branch") {
                branch_turn = st.turn;
                break;
            }
        }
        std::optional<std::size_t> running;
        for (const auto& pr : run.audit.records()) {
            if (pr.owner == kMainOwner && pr.turn == branch_turn + 1) running = pr.running;
        }
        c.pass = branch_turn > 0 && running == k;
        c.detail = std::to_string(running.value_or(0)) + " Running TCBs before the next main completion, expected " +
                   std::to_string(k);
    } else if (chk.kind == "killed_without_result") {
        c = check_kill_semantics(r, p.at("thread").get<std::string>());
        c.name = chk.kind;
    } else if (chk.kind == "compression") {
        std::size_t events = 0, fallbacks = 0;
        for (const auto& st : r.records()) {
            for (const auto& e : st.events) {
                if (e.kind != EventKind::Compress) continue;
                ++events;
                if (e.mode == "fallback") ++fallbacks;
            }
        }
        bool within = true;
        for (const auto& pr : run.audit.records()) {
            if (pr.tokens > pr.limit && !pr.forced) within = false;
        }
        const auto stats = run_context_stats(r.records());
        std::size_t injects = 0;
        for (const auto& st : r.records()) {
            injects += static_cast<std::size_t>(std::count_if(st.events.begin(), st.events.end(),
                                                              [](const StepEvent& e) { return e.kind == EventKind::Inject; }));
        }
        const std::size_t min_events = p.value("min_events", std::size_t{1});
        const bool need_fallback = p.value("fallback", false);
        c.pass = events >= min_events && within && stats.change_count == events + injects &&
                 (!need_fallback || fallbacks > 0) && !r.aborted && r.final_answer.has_value();
        c.detail = std::to_string(events) + " compressions (" + std::to_string(fallbacks) + " fallback), change count " +
                   std::to_string(stats.change_count) + ", every prompt within limit: " + (within ? "yes" : "no");
    } else {
        c.detail = "unknown check kind";
    }
    (void)s;
    return c;
}

}  // namespace

ScenarioReport run_scenario(const Scenario& s) {
    ScenarioReport rep;
    rep.name = s.name;
    rep.run = run_scenario_once(s, s.config.blocking_subthreads);
    const bool need_blocking = std::any_of(s.checks.begin(), s.checks.end(), [](const ScenarioCheck& c) {
        return c.kind == "async_faster_than_blocking";
    });
    if (need_blocking) rep.blocking = run_scenario_once(s, true);
    for (const auto& chk : s.checks) rep.checks.push_back(run_check(chk, s, rep.run, rep.blocking));

    rep.checks.push_back(check_isolation(rep.run.result));
    rep.checks.push_back(check_tcb_retention(rep.run.audit));
    rep.checks.push_back(check_nesting(rep.run.result));
    rep.checks.push_back(check_mailbox_delivery(rep.run.result));
    rep.checks.push_back(check_termination(rep.run.result, s.config.max_turns));

    const ScenarioRun again = run_scenario_once(s, s.config.blocking_subthreads);
    CheckResult det{"determinism", again.trajectory_text == rep.run.trajectory_text, ""};
    det.detail = det.pass ? "two runs produced byte-identical trajectories (" + std::to_string(again.trajectory_text.size()) +
                                " bytes)"
                          : "trajectories differ between identical runs";
    rep.checks.push_back(det);

    const auto rec = reconstruct(rep.run.result.records(), count_tokens);
    CheckResult replay{"replay", rec.mismatches.empty(), std::to_string(rec.prompts_checked) + " prompts rebuilt from records"};
    if (!rec.mismatches.empty()) {
        replay.detail = "prompt mismatch at " + rec.mismatches.front().owner + " turn " +
                        std::to_string(rec.mismatches.front().turn);
    }
    rep.checks.push_back(replay);
    return rep;
}

std::string render_scenario_report(const ScenarioReport& report) {
    std::string out = "scenario " + report.name + "\n";
    for (const auto& c : report.checks) out += std::string(c.pass ? "  PASS " : "  FAIL ") + c.name + ": " + c.detail + "\n";
    const auto& r = report.run.result;
    out += "  makespan " + fmt("%.3f", r.makespan) + " s";
    if (report.blocking) out += ", blocking makespan " + fmt("%.3f", report.blocking->result.makespan) + " s";
    out += "\n";
    if (r.final_answer) out += "  answer: " + *r.final_answer + "\n";
    out += report.passed() ? "result: PASS\n" : "result: FAIL\n";
    return out;
}

}  // namespace agentloop
