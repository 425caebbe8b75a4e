#pragma once

// Completion interface over an external chat-completion endpoint, a
// deterministic scripted policy, and the default token counter.

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agentloop/http.hpp"
#include "agentloop/model.hpp"

namespace agentloop {

/// ceil(bytes / 4).
std::size_t count_tokens(std::string_view text) noexcept;

struct ChatMessage {
    Role role = Role::System;
    std::string content;
};

struct CompletionRequest {
    std::vector<ChatMessage> messages;
    std::size_t max_generation_tokens = 4096;
    double temperature = 0.0;
    std::vector<std::string> stop_markers;
    /// Routing metadata for scripted policies; endpoints ignore it.
    std::string owner;
    int turn = 0;
};

struct CompletionResponse {
    std::string text;
    std::size_t prompt_tokens = 0;
    std::size_t generated_tokens = 0;
};

class EndpointFailure : public std::runtime_error {
public:
    enum class Kind { Unreachable, Status, BadResponse };

    EndpointFailure(Kind kind, int status, const std::string& what)
        : std::runtime_error(what), kind_(kind), status_(status) {}

    Kind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }

private:
    Kind kind_;
    int status_;
};

/// Must be safe to call concurrently; never mutates the caller's state.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    /// Throws EndpointFailure.
    virtual CompletionResponse complete(const CompletionRequest& request) const = 0;
};

/// Text of the last message in the request, empty when there is none.
std::string_view last_observation(const CompletionRequest& request) noexcept;

/// First matching rule wins. owner is "main", "sub" (any subthread), "judge",
/// "*" (anything) or an exact thread name. An unmatched request yields the
/// fallback Finish completion.
class ScriptedPolicy final : public CompletionBackend {
public:
    struct Rule {
        std::string owner = "*";
        std::optional<int> turn;
        std::optional<int> min_turn;
        std::optional<std::string> contains;
        std::optional<std::string> absent;
        std::string completion;
    };

    static constexpr std::string_view kFallback = "<answer>No scripted completion matched.</answer>";

    ScriptedPolicy() = default;
    explicit ScriptedPolicy(std::vector<Rule> rules, TokenCounter counter = count_tokens);

    /// {"rules": [{"owner","turn","min_turn","contains","absent","completion"}...]}
    static ScriptedPolicy from_json_text(std::string_view text, TokenCounter counter = count_tokens);
    static ScriptedPolicy from_file(const std::filesystem::path& path, TokenCounter counter = count_tokens);

    CompletionResponse complete(const CompletionRequest& request) const override;
    const std::vector<Rule>& rules() const noexcept { return rules_; }

private:
    bool matches(const Rule& rule, const CompletionRequest& request) const;

    std::vector<Rule> rules_;
    TokenCounter counter_ = count_tokens;
};

struct EndpointConfig {
    std::string url;
    std::string api_key;
    std::string model = "default";
};

/// Reads MODEL_ENDPOINT and MODEL_API_KEY.
EndpointConfig endpoint_config_from_env();

/// OpenAI-style chat completion: POST {model, messages, max_tokens,
/// temperature, stop}; reads choices[0].message.content and usage.
class EndpointBackend final : public CompletionBackend {
public:
    EndpointBackend(EndpointConfig config, HttpTransport transport, TokenCounter counter = count_tokens);

    CompletionResponse complete(const CompletionRequest& request) const override;

private:
    EndpointConfig config_;
    HttpTransport transport_;
    TokenCounter counter_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
void real_sleep(std::chrono::milliseconds d);
inline void no_sleep(std::chrono::milliseconds) {}

/// Retries EndpointFailure with exponential backoff; rethrows the last
/// failure once `policy.attempts` calls have failed. `attempts_made`
/// receives the number of calls issued.
CompletionResponse complete_with_retry(const CompletionBackend& backend, const CompletionRequest& request,
                                       const RetryPolicy& policy, const Sleeper& sleeper,
                                       int* attempts_made = nullptr);

}  // namespace agentloop
