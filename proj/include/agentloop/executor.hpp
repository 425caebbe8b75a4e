#pragma once

// Executors run the suspension points of thread loops (model calls, tool
// calls, sleeps) and hand them back to the scheduler one at a time.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include "agentloop/llm_client.hpp"
#include "agentloop/model.hpp"
#include "agentloop/tools.hpp"

namespace agentloop {

struct OpTicket {
    std::size_t slot = 0;
    std::uint64_t seq = 0;
    friend auto operator<=>(const OpTicket&, const OpTicket&) = default;
};

enum class OpKind { Completion, Judge, Tool, Sleep };

struct CompletionOutcome {
    std::optional<CompletionResponse> response;
    std::string error;
};

struct SleepOutcome {};

using OpOutcome = std::variant<CompletionOutcome, ToolResult, SleepOutcome>;

struct Work {
    OpKind kind = OpKind::Completion;
    std::function<OpOutcome()> run;
    double sleep_seconds = 0.0;
    std::string tool;
};

struct Finished {
    OpTicket ticket;
    OpKind kind = OpKind::Completion;
    OpOutcome outcome;
    Timestamp started = 0.0;
    Timestamp finished = 0.0;
};

class Executor {
public:
    virtual ~Executor() = default;

    virtual Timestamp now() const = 0;
    virtual void submit(OpTicket ticket, Work work) = 0;
    /// Next finished operation; nullopt once nothing live is in flight.
    virtual std::optional<Finished> next() = 0;
    /// Drops every in-flight operation of a slot; results never surface.
    virtual void cancel(std::size_t slot) = 0;
    /// Ends a pending sleep of a slot at the current time.
    virtual void wake(std::size_t slot) = 0;
    /// Retry backoff suitable for this clock.
    virtual Sleeper sleeper() const = 0;
};

/// Discrete-event clock. Work runs at submission; its result surfaces after
/// the simulated duration: model calls (prompt + generated tokens) / speed,
/// tools their unit time, sleeps their length, judge calls zero. Ties are
/// broken by (slot, submission order).
class SimulatedExecutor final : public Executor {
public:
    explicit SimulatedExecutor(RateCard rates) : rates_(std::move(rates)) {}

    Timestamp now() const override { return now_; }
    void submit(OpTicket ticket, Work work) override;
    std::optional<Finished> next() override;
    void cancel(std::size_t slot) override;
    void wake(std::size_t slot) override;
    Sleeper sleeper() const override { return no_sleep; }

private:
    using Key = std::tuple<Timestamp, std::size_t, std::uint64_t>;
    RateCard rates_;
    Timestamp now_ = 0.0;
    std::map<Key, Finished> pending_;
};

/// Wall clock. Each operation runs on its own std::thread.
class RealExecutor final : public Executor {
public:
    RealExecutor();
    ~RealExecutor() override;
    RealExecutor(const RealExecutor&) = delete;
    RealExecutor& operator=(const RealExecutor&) = delete;

    Timestamp now() const override;
    void submit(OpTicket ticket, Work work) override;
    std::optional<Finished> next() override;
    void cancel(std::size_t slot) override;
    void wake(std::size_t slot) override;
    Sleeper sleeper() const override { return real_sleep; }

private:
    std::chrono::steady_clock::time_point origin_;
    mutable std::mutex mu_;
    std::condition_variable done_cv_;
    std::condition_variable sleep_cv_;
    std::set<OpTicket> live_;
    std::set<std::size_t> woken_;
    std::deque<Finished> results_;
    std::vector<std::thread> workers_;
    bool stopping_ = false;
};

}  // namespace agentloop
