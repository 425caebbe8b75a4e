#pragma once

#include <map>
#include <string>

namespace agentloop {

/// Unit rates for trajectory-based accounting. Defaults are the reported
/// serving speed, tool latencies and list prices.
struct RateCard {
    double tokens_per_second = 1385.65;
    std::map<std::string, double> tool_time_seconds{{"search", 1.0}, {"visit", 2.0}};
    double price_per_1m_prompt = 0.80;
    double price_per_1m_generated = 0.80;
    std::map<std::string, double> price_per_call{{"search", 0.001}, {"visit", 0.0}};

    double tool_time(const std::string& tool) const {
        auto it = tool_time_seconds.find(tool);
        return it == tool_time_seconds.end() ? 0.0 : it->second;
    }
    double call_price(const std::string& tool) const {
        auto it = price_per_call.find(tool);
        return it == price_per_call.end() ? 0.0 : it->second;
    }
    bool valid() const;
};

}  // namespace agentloop
