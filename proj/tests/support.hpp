#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentloop/llm_client.hpp"
#include "agentloop/runtime.hpp"
#include "agentloop/tools.hpp"

namespace testing {

inline std::string call(const std::string& name, const nlohmann::json& args) {
    return "<tool_call>\n" + nlohmann::json{{"name", name}, {"arguments", args}}.dump() + "\n</tool_call>";
}

inline std::string answer(const std::string& text) { return "<answer>" + text + "</answer>"; }

inline nlohmann::json seed(const std::string& id, const std::string& target = "Find a fact.",
                           std::vector<std::string> tools = {"search", "visit"}, const std::string& ctx = "") {
    return {{"id", id}, {"target", target}, {"allowed_tools", tools}, {"assigned_context", ctx}};
}

using Rule = agentloop::ScriptedPolicy::Rule;

inline Rule rule(std::string owner, std::string completion, std::optional<int> turn = std::nullopt) {
    Rule r;
    r.owner = std::move(owner);
    r.completion = std::move(completion);
    r.turn = turn;
    return r;
}

inline Rule rule_min(std::string owner, int min_turn, std::string completion) {
    Rule r;
    r.owner = std::move(owner);
    r.min_turn = min_turn;
    r.completion = std::move(completion);
    return r;
}

inline Rule rule_if(std::string owner, std::string contains, std::string completion) {
    Rule r;
    r.owner = std::move(owner);
    r.contains = std::move(contains);
    r.completion = std::move(completion);
    return r;
}

inline agentloop::FixtureBackend small_corpus() {
    agentloop::FixtureBackend f;
    f.add_search("q", agentloop::render_search_hits("q", {{"Title", "https://example.org/a", "snippet"}}));
    f.add_page("https://example.org/a", "Page A says 42.");
    f.add_unreachable("https://example.org/down");
    return f;
}

struct Harness {
    agentloop::RunConfig config;
    agentloop::ScriptedPolicy policy;
    agentloop::FixtureBackend tools = small_corpus();
    const agentloop::CompletionBackend* judge = nullptr;
    agentloop::RunObserver* observer = nullptr;

    agentloop::RunResult run(const std::string& task = "Answer the question.") {
        agentloop::RuntimeDeps deps;
        deps.policy = &policy;
        deps.tools = &tools;
        deps.judge = judge;
        deps.observer = observer;
        deps.retry.initial_backoff = std::chrono::milliseconds(0);
        return agentloop::run_main(task, config, deps);
    }
};

/// Backend that always fails.
class DeadBackend final : public agentloop::CompletionBackend {
public:
    agentloop::CompletionResponse complete(const agentloop::CompletionRequest&) const override {
        ++calls;
        throw agentloop::EndpointFailure(agentloop::EndpointFailure::Kind::Unreachable, 0, "unreachable");
    }
    mutable int calls = 0;
};

inline std::size_t count_events(const agentloop::RunResult& r, agentloop::EventKind k) {
    std::size_t n = 0;
    for (const auto& s : r.records()) {
        for (const auto& e : s.events) n += e.kind == k;
    }
    return n;
}

}  // namespace testing
