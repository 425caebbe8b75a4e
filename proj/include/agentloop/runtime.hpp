#pragma once

// Main-thread and subthread loops, the TCB registry, the result mailbox and
// context compression.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agentloop/executor.hpp"
#include "agentloop/llm_client.hpp"
#include "agentloop/model.hpp"
#include "agentloop/protocol.hpp"
#include "agentloop/tools.hpp"

namespace agentloop {

/// Insertion-ordered TCBs that have not been deleted. Ids stay reserved for
/// the whole run once used, even after deletion.
class Registry {
public:
    Tcb& add(Tcb tcb, std::size_t slot);
    Tcb* find(std::string_view id);
    const Tcb* find(std::string_view id) const;
    std::optional<std::size_t> slot_of(std::string_view id) const;
    /// Removes a terminal block; false if absent or still running.
    bool remove(std::string_view id);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t running_count() const noexcept;
    std::vector<Tcb> snapshot() const;
    const std::set<std::string>& used_ids() const noexcept { return used_ids_; }

private:
    struct Entry {
        Tcb tcb;
        std::size_t slot;
    };
    std::vector<Entry> entries_;
    std::set<std::string> used_ids_;
};

/// What a thread is about to send to the model.
struct PromptView {
    std::string owner;
    int turn = 0;
    bool forced = false;
    const ContextWindow* window = nullptr;
    std::vector<Tcb> registry;
    std::size_t compression_limit = 0;
    Timestamp now = 0.0;
};

class RunObserver {
public:
    virtual ~RunObserver() = default;
    virtual void on_prompt(const PromptView&) {}
};

struct RuntimeDeps {
    const CompletionBackend* policy = nullptr;
    const ToolBackend* tools = nullptr;
    /// Summarizes over-long contexts; without one compression truncates.
    const CompletionBackend* judge = nullptr;
    TokenCounter counter = count_tokens;
    RunObserver* observer = nullptr;
    RetryPolicy retry;
};

struct RunResult {
    std::optional<std::string> final_answer;
    /// The main thread hit max_turns and answered on the forced turn.
    bool forced = false;
    /// The main thread's model endpoint failed for good.
    bool aborted = false;
    std::string abort_reason;

    Trajectory main;
    /// In spawn order.
    std::vector<Trajectory> subthreads;
    /// Every block ever spawned, in spawn order, with final state.
    std::vector<Tcb> tcbs;
    /// Blocks still registered when the run ended.
    std::vector<Tcb> registry;
    /// Final windows: main first, then subthreads in spawn order.
    std::vector<ContextWindow> windows;
    /// Every result posted to the mailbox, in posting order.
    std::vector<InjectedResult> posted;
    Timestamp makespan = 0.0;

    /// All steps merged in file order: stable by sim_time_end, main first on ties.
    std::vector<TrajectoryStep> records() const;
};

RunResult run_main(const std::string& task, const RunConfig& config, const RuntimeDeps& deps, Executor& executor);

/// Convenience wrapper that picks the executor from config.clock.
RunResult run_main(const std::string& task, const RunConfig& config, const RuntimeDeps& deps);

struct CompressionOutcome {
    ContextWindow window;
    /// Absent when the window was already within the limit.
    std::optional<StepEvent> event;
    /// Non-system messages after compression (what trajectories persist).
    std::vector<HistoryMessage> history;
};

extern const std::string kTruncationMarker;

CompletionRequest compression_request(const ContextWindow& window, const std::string& task);

/// Rebuilds `window` as system prompt + <summary> (+ latest TCB block) when
/// `judge_text` holds a usable summary that fits `limit`; otherwise keeps the
/// system prompt and a recent suffix no larger than a quarter of the
/// non-system tokens.
CompressionOutcome apply_compression(const ContextWindow& window, const std::optional<std::string>& judge_text,
                                     std::size_t limit);

CompressionOutcome compress_context(const ContextWindow& window, const std::string& task,
                                    const CompletionBackend* judge, std::size_t limit);

std::vector<HistoryMessage> history_of(const ContextWindow& window);

}  // namespace agentloop
