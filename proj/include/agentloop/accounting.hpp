#pragma once

// Latency and dollar-cost accounting over trajectory records.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "agentloop/model.hpp"
#include "agentloop/rates.hpp"

namespace agentloop {

/// Usage of one thread. Token sums are doubles so rate checks can use
/// fractional counts; values folded from records are always whole.
struct Ledger {
    std::string owner;
    double prompt_tokens = 0.0;
    double generated_tokens = 0.0;
    std::map<std::string, std::size_t> tool_calls;
    double sleep_seconds = 0.0;

    void add(const TrajectoryStep& step);
};

/// One ledger per owner, in order of first appearance.
std::vector<Ledger> ledgers_from_steps(const std::vector<TrajectoryStep>& steps);

/// (prompt + generated) / tokens_per_second + sum of tool unit times + sleep,
/// charged on the main thread's ledger only.
double total_time(const Ledger& main, const RateCard& rates);

/// Token cost of every ledger plus per-call tool prices.
double total_cost(std::span<const Ledger> ledgers, const RateCard& rates);

struct AccountingReport {
    double total_time = 0.0;
    double total_cost = 0.0;
    /// Simulated wall-clock span of the run (latest record end).
    double makespan = 0.0;
    std::vector<Ledger> ledgers;
};

AccountingReport account(const std::vector<TrajectoryStep>& steps, const RateCard& rates);

std::string accounting_json(const AccountingReport& report, const RateCard& rates);
std::string render_report(const AccountingReport& report);

}  // namespace agentloop
