#include "agentloop/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace agentloop {

using nlohmann::json;

namespace {

template <typename T>
void take(const json& doc, const char* key, T& out) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
    }
}

void apply_rates(const json& r, RateCard& rates) {
    if (!r.is_object()) throw std::invalid_argument("config key 'rates' must be an object");
    for (const auto& [key, _] : r.items()) {
        if (key != "tokens_per_second" && key != "tool_time_seconds" && key != "price_per_1m_prompt" &&
            key != "price_per_1m_generated" && key != "price_per_call") {
            throw std::invalid_argument("unknown rates key '" + key + "'");
        }
    }
    take(r, "tokens_per_second", rates.tokens_per_second);
    take(r, "price_per_1m_prompt", rates.price_per_1m_prompt);
    take(r, "price_per_1m_generated", rates.price_per_1m_generated);
    if (auto it = r.find("tool_time_seconds"); it != r.end()) {
        std::map<std::string, double> m;
        take(r, "tool_time_seconds", m);
        for (auto& [k, v] : m) rates.tool_time_seconds[k] = v;
    }
    if (auto it = r.find("price_per_call"); it != r.end()) {
        std::map<std::string, double> m;
        take(r, "price_per_call", m);
        for (auto& [k, v] : m) rates.price_per_call[k] = v;
    }
}

}  // namespace

RunConfig load_config_text(std::string_view json_text, RunConfig base) {
    const json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw std::invalid_argument("config is not valid JSON");
    if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    static const std::set<std::string> known = {
        "max_turns",         "context_budget",        "compression_threshold", "max_concurrent_subthreads",
        "tool_backend",      "model_endpoint",        "model_name",            "seed",
        "max_generation_tokens", "temperature",       "blocking_subthreads",   "sleep_wakes_on_result",
        "clock",             "fixture_path",          "policy_path",           "judge_endpoint",
        "judge_policy_path", "rates"};
    for (const auto& [key, _] : doc.items()) {
        if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
    }
    RunConfig c = std::move(base);
    take(doc, "max_turns", c.max_turns);
    take(doc, "context_budget", c.context_budget);
    take(doc, "compression_threshold", c.compression_threshold);
    take(doc, "max_concurrent_subthreads", c.max_concurrent_subthreads);
    take(doc, "model_endpoint", c.model_endpoint);
    take(doc, "model_name", c.model_name);
    take(doc, "seed", c.seed);
    take(doc, "max_generation_tokens", c.max_generation_tokens);
    take(doc, "temperature", c.temperature);
    take(doc, "blocking_subthreads", c.blocking_subthreads);
    take(doc, "sleep_wakes_on_result", c.sleep_wakes_on_result);
    take(doc, "fixture_path", c.fixture_path);
    take(doc, "policy_path", c.policy_path);
    take(doc, "judge_endpoint", c.judge_endpoint);
    take(doc, "judge_policy_path", c.judge_policy_path);
    if (doc.contains("tool_backend")) {
        std::string v;
        take(doc, "tool_backend", v);
        if (v == "live") {
            c.tool_backend = ToolBackendKind::Live;
        } else if (v == "fixture") {
            c.tool_backend = ToolBackendKind::Fixture;
        } else {
            throw std::invalid_argument("tool_backend must be 'live' or 'fixture'");
        }
    }
    if (doc.contains("clock")) {
        std::string v;
        take(doc, "clock", v);
        if (v == "simulated") {
            c.clock = ClockKind::Simulated;
        } else if (v == "real") {
            c.clock = ClockKind::Real;
        } else {
            throw std::invalid_argument("clock must be 'simulated' or 'real'");
        }
    }
    if (doc.contains("rates")) apply_rates(doc.at("rates"), c.rates);
    return c;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config_text(buf.str(), std::move(base));
}

std::string config_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["max_turns"] = c.max_turns;
    j["context_budget"] = c.context_budget;
    j["compression_threshold"] = c.compression_threshold;
    j["max_concurrent_subthreads"] = c.max_concurrent_subthreads;
    j["tool_backend"] = c.tool_backend == ToolBackendKind::Live ? "live" : "fixture";
    j["model_endpoint"] = c.model_endpoint;
    j["model_name"] = c.model_name;
    j["seed"] = c.seed;
    j["max_generation_tokens"] = c.max_generation_tokens;
    j["temperature"] = c.temperature;
    j["blocking_subthreads"] = c.blocking_subthreads;
    j["sleep_wakes_on_result"] = c.sleep_wakes_on_result;
    j["clock"] = c.clock == ClockKind::Real ? "real" : "simulated";
    j["fixture_path"] = c.fixture_path;
    j["policy_path"] = c.policy_path;
    j["judge_endpoint"] = c.judge_endpoint;
    j["judge_policy_path"] = c.judge_policy_path;
    j["rates"] = {{"tokens_per_second", c.rates.tokens_per_second},
                  {"tool_time_seconds", c.rates.tool_time_seconds},
                  {"price_per_1m_prompt", c.rates.price_per_1m_prompt},
                  {"price_per_1m_generated", c.rates.price_per_1m_generated},
                  {"price_per_call", c.rates.price_per_call}};
    return j.dump(2) + "\n";
}

}  // namespace agentloop
