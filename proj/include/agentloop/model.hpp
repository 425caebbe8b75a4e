#pragma once

// Domain types shared by every part of the runtime: thread identity, control
// blocks, messages, context windows, actions, observations and trajectories.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentloop/rates.hpp"

namespace agentloop {

/// Seconds on the run clock (simulated or wall, depending on the executor).
using Timestamp = double;

/// Counts tokens in a piece of text. Must be deterministic.
using TokenCounter = std::function<std::size_t(std::string_view)>;

inline constexpr std::size_t kMaxThreadIdLength = 128;
inline constexpr std::string_view kMainOwner = "main";

class ThreadId {
public:
    /// Returns nullopt for empty ids, ids with whitespace, ids longer than
    /// kMaxThreadIdLength, and the reserved main-thread name.
    static std::optional<ThreadId> make(std::string_view text);

    const std::string& str() const noexcept { return value_; }

    friend bool operator==(const ThreadId&, const ThreadId&) = default;
    friend auto operator<=>(const ThreadId&, const ThreadId&) = default;

private:
    explicit ThreadId(std::string v) : value_(std::move(v)) {}
    std::string value_;
};

/// Either the main thread or one subthread.
class Owner {
public:
    static Owner main() { return Owner{}; }
    static Owner sub(ThreadId id) { return Owner{std::move(id)}; }

    bool is_main() const noexcept { return !id_.has_value(); }
    const std::optional<ThreadId>& id() const noexcept { return id_; }
    std::string name() const { return id_ ? id_->str() : std::string(kMainOwner); }

    friend bool operator==(const Owner&, const Owner&) = default;

private:
    Owner() = default;
    explicit Owner(ThreadId id) : id_(std::move(id)) {}
    std::optional<ThreadId> id_;
};

enum class ThreadState { Running, Successful, Failed, Killed };

bool is_terminal(ThreadState s) noexcept;
/// Only Running -> {Successful, Failed, Killed} is legal.
bool can_transition(ThreadState from, ThreadState to) noexcept;
/// Lower-case state name used in files: running, successful, failed, killed.
std::string_view to_string(ThreadState s) noexcept;
std::optional<ThreadState> thread_state_from_string(std::string_view s) noexcept;
/// Status label shown to the main thread: Running, Success, Failed, Killed.
std::string_view status_label(ThreadState s) noexcept;

/// Fields the main thread proposes when branching.
struct TcbSeed {
    std::string id;
    std::string goal;
    std::vector<std::string> allowed_tools;
    std::string prefix_context;
    std::optional<std::string> extra_info;

    friend bool operator==(const TcbSeed&, const TcbSeed&) = default;
};

/// Thread control block. The registry owns the mutable part (state, end_time,
/// result) and only changes it through transition().
struct Tcb {
    ThreadId id;
    std::string goal;
    ThreadState state = ThreadState::Running;
    std::vector<std::string> allowed_tools;
    std::string prefix_context;
    std::optional<std::string> extra_info;
    Timestamp start_time = 0.0;
    std::optional<Timestamp> end_time;
    std::optional<std::string> result;

    /// Applies a legal transition; returns false and leaves the block
    /// untouched otherwise. Killed blocks never carry a result.
    bool transition(ThreadState to, Timestamp now, std::optional<std::string> result_text);
};

/// (end_time or now) - start_time, clamped at zero.
double tcb_elapsed(const Tcb& tcb, Timestamp now) noexcept;

struct SeedRejection {
    enum class Kind { DuplicateId, UnknownTool, EmptyGoal, InvalidId };
    Kind kind;
    std::string detail;

    std::string message() const;
};

/// Checks a branch seed against the ids already used in this run and the
/// subthread-eligible tool names. On success the block is Running and
/// started at `now`.
std::variant<Tcb, SeedRejection> validate_tcb_seed(const TcbSeed& seed,
                                                   const std::set<std::string>& existing_ids,
                                                   const std::set<std::string>& eligible_tools,
                                                   Timestamp now);

enum class Role { System, Assistant, Environment };
std::string_view to_string(Role r) noexcept;
std::optional<Role> role_from_string(std::string_view s) noexcept;

/// Byte range of a rendered TCB block inside a message.
struct TcbSpan {
    std::size_t offset = 0;
    std::size_t length = 0;

    friend bool operator==(const TcbSpan&, const TcbSpan&) = default;
};

struct Message {
    Role role = Role::System;
    std::string content;
    std::size_t token_count = 0;
    /// Name of the thread that produced the message or that it is addressed to.
    std::string provenance;
    std::optional<TcbSpan> tcb_span;
};

/// Ordered history of one thread. Messages are appended through push() so
/// token counts always match the configured counter.
class ContextWindow {
public:
    ContextWindow(Owner owner, std::size_t budget, TokenCounter counter);

    const Owner& owner() const noexcept { return owner_; }
    std::size_t budget() const noexcept { return budget_; }
    const TokenCounter& counter() const noexcept { return counter_; }
    const std::vector<Message>& messages() const noexcept { return messages_; }
    std::size_t total_tokens() const noexcept;

    void push(Role role, std::string content, std::optional<TcbSpan> span = std::nullopt);
    /// Replaces the content of message i, recounting its tokens.
    void rewrite(std::size_t i, std::string content, std::optional<TcbSpan> span);
    /// Drops every message after the first `keep`.
    void truncate(std::size_t keep);

private:
    Owner owner_;
    std::size_t budget_;
    TokenCounter counter_;
    std::vector<Message> messages_;
};

struct SearchCall {
    std::vector<std::string> queries;
    friend bool operator==(const SearchCall&, const SearchCall&) = default;
};

struct VisitCall {
    std::vector<std::string> urls;
    std::string goal;
    friend bool operator==(const VisitCall&, const VisitCall&) = default;
};

struct ToolCall {
    std::variant<SearchCall, VisitCall> call;

    std::string_view name() const noexcept;
    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct Branch {
    std::vector<TcbSeed> seeds;
    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Kill {
    std::string id;
    friend bool operator==(const Kill&, const Kill&) = default;
};

struct Delete {
    std::string id;
    friend bool operator==(const Delete&, const Delete&) = default;
};

struct Sleep {
    double seconds = 0.0;
    friend bool operator==(const Sleep&, const Sleep&) = default;
};

struct Finish {
    std::string answer;
    friend bool operator==(const Finish&, const Finish&) = default;
};

using Act = std::variant<ToolCall, Branch, Kill, Delete, Sleep, Finish>;

inline constexpr double kMaxSleepSeconds = 60.0;

struct Action {
    std::optional<std::string> think;
    Act act;

    friend bool operator==(const Action&, const Action&) = default;
};

/// Catalog name of the act: search, visit, branch, kill, delete, sleep or finish.
std::string_view act_name(const Act& act) noexcept;

struct InjectedResult {
    std::string id;
    ThreadState state = ThreadState::Successful;
    std::string result;
    Timestamp completed_at = 0.0;
};

struct Observation {
    std::string tool_feedback;
    /// One rendered summary per registered TCB; main thread only.
    std::vector<std::string> tcb_snapshot;
    /// Finished subthread results, ordered by completion time; main thread only.
    std::vector<InjectedResult> injected_results;
};

enum class EventKind { Spawn, Kill, Delete, Compress, Inject };
std::string_view to_string(EventKind k) noexcept;
std::optional<EventKind> event_kind_from_string(std::string_view s) noexcept;

struct StepEvent {
    EventKind kind = EventKind::Spawn;
    /// Thread the event concerns (spawn/kill/delete/inject).
    std::string thread;
    /// compress: "summary" or "fallback"; kill: "requested" or "shutdown".
    std::string mode;
    std::size_t before_tokens = 0;
    std::size_t after_tokens = 0;
    /// inject: final state and result of the finished subthread.
    std::string state;
    std::string result;

    friend bool operator==(const StepEvent&, const StepEvent&) = default;
};

struct HistoryMessage {
    Role role = Role::System;
    std::string content;
    std::optional<TcbSpan> tcb_span;

    friend bool operator==(const HistoryMessage&, const HistoryMessage&) = default;
};

/// One persisted turn of one thread.
struct TrajectoryStep {
    std::string owner;
    int turn = 0;
    std::string raw_output;
    std::string act_kind;
    std::string act_args_digest;
    std::string observation;
    std::size_t prompt_tokens = 0;
    std::size_t generated_tokens = 0;
    Timestamp sim_time_start = 0.0;
    Timestamp sim_time_end = 0.0;
    std::vector<StepEvent> events;

    /// Executed tool (search/visit) when the turn ran one.
    std::optional<std::string> tool;
    double sleep_seconds = 0.0;
    std::string prompt_digest;
    std::optional<TcbSpan> tcb_span;
    bool forced = false;
    /// Present on the first turn of each thread.
    std::optional<std::string> system_prompt;
    /// Non-system history after a compression at the start of this turn.
    std::optional<std::vector<HistoryMessage>> history;
    /// Final state, on the last step of a finished subthread.
    std::optional<std::string> state;

    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
    std::string owner;
    std::vector<TrajectoryStep> steps;
    std::optional<std::string> final_answer;
    bool forced = false;
};

enum class ToolBackendKind { Live, Fixture };
enum class ClockKind { Simulated, Real };

struct RunConfig {
    int max_turns = 30;
    std::size_t context_budget = 128000;
    double compression_threshold = 0.9;
    std::size_t max_concurrent_subthreads = 8;
    ToolBackendKind tool_backend = ToolBackendKind::Fixture;
    std::string model_endpoint;
    std::string model_name = "default";
    std::uint64_t seed = 0;
    std::size_t max_generation_tokens = 4096;
    double temperature = 0.0;

    /// Main thread waits for every running subthread before observing.
    bool blocking_subthreads = false;
    /// A posted subthread result ends a main-thread sleep early.
    bool sleep_wakes_on_result = false;
    ClockKind clock = ClockKind::Simulated;

    std::string fixture_path;
    std::string policy_path;
    std::string judge_endpoint;
    std::string judge_policy_path;

    RateCard rates;

    std::size_t compression_limit() const noexcept {
        return static_cast<std::size_t>(compression_threshold * static_cast<double>(context_budget));
    }
};

/// Empty when valid. `min_prompt_tokens` is the size of the smallest
/// renderable system prompt.
std::vector<std::string> validate_config(const RunConfig& config, std::size_t min_prompt_tokens);

}  // namespace agentloop
