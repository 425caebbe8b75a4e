#include "agentloop/accounting.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

namespace agentloop {

void Ledger::add(const TrajectoryStep& step) {
    prompt_tokens += static_cast<double>(step.prompt_tokens);
    generated_tokens += static_cast<double>(step.generated_tokens);
    if (step.tool) ++tool_calls[*step.tool];
    sleep_seconds += step.sleep_seconds;
}

std::vector<Ledger> ledgers_from_steps(const std::vector<TrajectoryStep>& steps) {
    std::vector<Ledger> out;
    std::map<std::string, std::size_t> index;
    for (const auto& s : steps) {
        auto [it, fresh] = index.emplace(s.owner, out.size());
        if (fresh) {
            out.emplace_back();
            out.back().owner = s.owner;
        }
        out[it->second].add(s);
    }
    return out;
}

double total_time(const Ledger& main, const RateCard& rates) {
    double t = (main.prompt_tokens + main.generated_tokens) / rates.tokens_per_second;
    for (const auto& [tool, n] : main.tool_calls) t += static_cast<double>(n) * rates.tool_time(tool);
    return t + main.sleep_seconds;
}

double total_cost(std::span<const Ledger> ledgers, const RateCard& rates) {
    double c = 0.0;
    for (const auto& l : ledgers) {
        c += l.prompt_tokens / 1e6 * rates.price_per_1m_prompt;
        c += l.generated_tokens / 1e6 * rates.price_per_1m_generated;
        for (const auto& [tool, n] : l.tool_calls) c += static_cast<double>(n) * rates.call_price(tool);
    }
    return c;
}

AccountingReport account(const std::vector<TrajectoryStep>& steps, const RateCard& rates) {
    AccountingReport r;
    r.ledgers = ledgers_from_steps(steps);
    const auto main = std::find_if(r.ledgers.begin(), r.ledgers.end(), [](const Ledger& l) { return l.owner == kMainOwner; });
    r.total_time = main == r.ledgers.end() ? 0.0 : total_time(*main, rates);
    r.total_cost = total_cost(r.ledgers, rates);
    for (const auto& s : steps) r.makespan = std::max(r.makespan, s.sim_time_end);
    return r;
}

std::string accounting_json(const AccountingReport& report, const RateCard& rates) {
    nlohmann::ordered_json j;
    j["total_time_seconds"] = report.total_time;
    j["total_cost_usd"] = report.total_cost;
    j["makespan_seconds"] = report.makespan;
    nlohmann::ordered_json threads = nlohmann::ordered_json::array();
    for (const auto& l : report.ledgers) {
        nlohmann::ordered_json t;
        t["owner"] = l.owner;
        t["prompt_tokens"] = l.prompt_tokens;
        t["generated_tokens"] = l.generated_tokens;
        t["tool_calls"] = l.tool_calls;
        t["sleep_seconds"] = l.sleep_seconds;
        threads.push_back(std::move(t));
    }
    j["threads"] = std::move(threads);
    j["rates"] = {{"tokens_per_second", rates.tokens_per_second},
                  {"tool_time_seconds", rates.tool_time_seconds},
                  {"price_per_1m_prompt", rates.price_per_1m_prompt},
                  {"price_per_1m_generated", rates.price_per_1m_generated},
                  {"price_per_call", rates.price_per_call}};
    return j.dump(2) + "\n";
}

std::string render_report(const AccountingReport& report) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "Total time (main thread): %.3f s\nTotal cost (all threads): $%.6f\nMakespan: %.3f s\n\n",
                  report.total_time, report.total_cost, report.makespan);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-16s %12s %12s %8s %8s %8s\n", "thread", "prompt", "generated", "search", "visit",
                  "sleep");
    out += buf;
    for (const auto& l : report.ledgers) {
        auto calls = [&](const char* t) {
            auto it = l.tool_calls.find(t);
            return it == l.tool_calls.end() ? std::size_t{0} : it->second;
        };
        std::snprintf(buf, sizeof buf, "%-16s %12.0f %12.0f %8zu %8zu %8.1f\n", l.owner.c_str(), l.prompt_tokens,
                      l.generated_tokens, calls("search"), calls("visit"), l.sleep_seconds);
        out += buf;
    }
    return out;
}

}  // namespace agentloop
