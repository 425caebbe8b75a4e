#include "agentloop/llm_client.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace agentloop {

using nlohmann::json;

std::size_t count_tokens(std::string_view text) noexcept { return (text.size() + 3) / 4; }

std::string_view last_observation(const CompletionRequest& request) noexcept {
    if (request.messages.empty()) return {};
    return request.messages.back().content;
}

ScriptedPolicy::ScriptedPolicy(std::vector<Rule> rules, TokenCounter counter)
    : rules_(std::move(rules)), counter_(std::move(counter)) {}

ScriptedPolicy ScriptedPolicy::from_json_text(std::string_view text, TokenCounter counter) {
    const json doc = json::parse(text);
    std::vector<Rule> rules;
    for (const auto& r : doc.at("rules")) {
        Rule rule;
        rule.owner = r.value("owner", "*");
        if (r.contains("turn")) rule.turn = r.at("turn").get<int>();
        if (r.contains("min_turn")) rule.min_turn = r.at("min_turn").get<int>();
        if (r.contains("contains")) rule.contains = r.at("contains").get<std::string>();
        if (r.contains("absent")) rule.absent = r.at("absent").get<std::string>();
        rule.completion = r.at("completion").get<std::string>();
        rules.push_back(std::move(rule));
    }
    return ScriptedPolicy(std::move(rules), std::move(counter));
}

ScriptedPolicy ScriptedPolicy::from_file(const std::filesystem::path& path, TokenCounter counter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open scripted policy: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), std::move(counter));
}

bool ScriptedPolicy::matches(const Rule& rule, const CompletionRequest& request) const {
    if (rule.owner == "sub") {
        if (request.owner == kMainOwner || request.owner == "judge") return false;
    } else if (rule.owner != "*" && rule.owner != request.owner) {
        return false;
    }
    if (rule.turn && *rule.turn != request.turn) return false;
    if (rule.min_turn && request.turn < *rule.min_turn) return false;
    const std::string_view last = last_observation(request);
    if (rule.contains && last.find(*rule.contains) == std::string_view::npos) return false;
    if (rule.absent && last.find(*rule.absent) != std::string_view::npos) return false;
    return true;
}

CompletionResponse ScriptedPolicy::complete(const CompletionRequest& request) const {
    std::string text(kFallback);
    for (const auto& rule : rules_) {
        if (matches(rule, request)) {
            text = rule.completion;
            break;
        }
    }
    std::size_t prompt = 0;
    for (const auto& m : request.messages) prompt += counter_(m.content);
    CompletionResponse resp;
    resp.prompt_tokens = prompt;
    resp.generated_tokens = counter_(text);
    resp.text = std::move(text);
    return resp;
}

EndpointConfig endpoint_config_from_env() {
    EndpointConfig config;
    if (const char* v = std::getenv("MODEL_ENDPOINT")) config.url = v;
    if (const char* v = std::getenv("MODEL_API_KEY")) config.api_key = v;
    return config;
}

EndpointBackend::EndpointBackend(EndpointConfig config, HttpTransport transport, TokenCounter counter)
    : config_(std::move(config)), transport_(std::move(transport)), counter_(std::move(counter)) {}

namespace {

std::string wire_role(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::Assistant: return "assistant";
        case Role::Environment: return "user";
    }
    return "user";
}

}  // namespace

CompletionResponse EndpointBackend::complete(const CompletionRequest& request) const {
    json messages = json::array();
    std::size_t local_prompt = 0;
    for (const auto& m : request.messages) {
        messages.push_back({{"role", wire_role(m.role)}, {"content", m.content}});
        local_prompt += counter_(m.content);
    }
    json body = {{"model", config_.model},
                 {"messages", std::move(messages)},
                 {"max_tokens", request.max_generation_tokens},
                 {"temperature", request.temperature}};
    if (!request.stop_markers.empty()) body["stop"] = request.stop_markers;

    HttpRequest http;
    http.method = "POST";
    http.url = config_.url;
    http.headers["Content-Type"] = "application/json";
    if (!config_.api_key.empty()) http.headers["Authorization"] = "Bearer " + config_.api_key;
    http.body = body.dump(-1, ' ', false, json::error_handler_t::replace);

    auto resp = transport_(http);
    if (!resp) throw EndpointFailure(EndpointFailure::Kind::Unreachable, 0, "model endpoint unreachable: " + config_.url);
    if (resp->status != 200) {
        throw EndpointFailure(EndpointFailure::Kind::Status, resp->status,
                              "model endpoint returned HTTP " + std::to_string(resp->status));
    }
    const json doc = json::parse(resp->body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw EndpointFailure(EndpointFailure::Kind::BadResponse, resp->status, "model endpoint returned invalid JSON");
    }
    CompletionResponse out;
    try {
        const auto& choice = doc.at("choices").at(0);
        if (choice.contains("message")) {
            out.text = choice.at("message").value("content", "");
        } else {
            out.text = choice.value("text", "");
        }
    } catch (const json::exception&) {
        throw EndpointFailure(EndpointFailure::Kind::BadResponse, resp->status, "model endpoint response has no choices");
    }
    out.prompt_tokens = local_prompt;
    out.generated_tokens = counter_(out.text);
    if (auto it = doc.find("usage"); it != doc.end() && it->is_object()) {
        if (auto p = it->find("prompt_tokens"); p != it->end() && p->is_number_unsigned()) out.prompt_tokens = p->get<std::size_t>();
        if (auto c = it->find("completion_tokens"); c != it->end() && c->is_number_unsigned()) {
            out.generated_tokens = c->get<std::size_t>();
        }
    }
    return out;
}

void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

CompletionResponse complete_with_retry(const CompletionBackend& backend, const CompletionRequest& request,
                                       const RetryPolicy& policy, const Sleeper& sleeper, int* attempts_made) {
    auto backoff = policy.initial_backoff;
    const int attempts = std::max(1, policy.attempts);
    for (int attempt = 1;; ++attempt) {
        if (attempts_made) *attempts_made = attempt;
        try {
            return backend.complete(request);
        } catch (const EndpointFailure&) {
            if (attempt >= attempts) throw;
        }
        sleeper(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * policy.multiplier));
    }
}

}  // namespace agentloop
