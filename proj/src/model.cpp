#include "agentloop/model.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace agentloop {

namespace {

bool has_whitespace(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::optional<ThreadId> ThreadId::make(std::string_view text) {
    if (text.empty() || text.size() > kMaxThreadIdLength || has_whitespace(text) || text == kMainOwner) {
        return std::nullopt;
    }
    return ThreadId{std::string(text)};
}

bool RateCard::valid() const {
    auto non_negative = [](const std::map<std::string, double>& m) {
        return std::all_of(m.begin(), m.end(), [](const auto& kv) { return kv.second >= 0.0; });
    };
    return tokens_per_second > 0.0 && price_per_1m_prompt >= 0.0 && price_per_1m_generated >= 0.0 &&
           non_negative(tool_time_seconds) && non_negative(price_per_call);
}

bool is_terminal(ThreadState s) noexcept { return s != ThreadState::Running; }

bool can_transition(ThreadState from, ThreadState to) noexcept {
    return from == ThreadState::Running && to != ThreadState::Running;
}

std::string_view to_string(ThreadState s) noexcept {
    switch (s) {
        case ThreadState::Running: return "running";
        case ThreadState::Successful: return "successful";
        case ThreadState::Failed: return "failed";
        case ThreadState::Killed: return "killed";
    }
    return "running";
}

std::optional<ThreadState> thread_state_from_string(std::string_view s) noexcept {
    if (s == "running") return ThreadState::Running;
    if (s == "successful") return ThreadState::Successful;
    if (s == "failed") return ThreadState::Failed;
    if (s == "killed") return ThreadState::Killed;
    return std::nullopt;
}

std::string_view status_label(ThreadState s) noexcept {
    switch (s) {
        case ThreadState::Running: return "Running";
        case ThreadState::Successful: return "Success";
        case ThreadState::Failed: return "Failed";
        case ThreadState::Killed: return "Killed";
    }
    return "Running";
}

bool Tcb::transition(ThreadState to, Timestamp now, std::optional<std::string> result_text) {
    if (!can_transition(state, to)) return false;
    state = to;
    end_time = std::max(now, start_time);
    if (to == ThreadState::Killed) {
        result.reset();
    } else {
        result = result_text.value_or(std::string{});
    }
    return true;
}

double tcb_elapsed(const Tcb& tcb, Timestamp now) noexcept {
    const Timestamp until = tcb.end_time.value_or(now);
    return std::max(0.0, until - tcb.start_time);
}

std::string SeedRejection::message() const {
    switch (kind) {
        case Kind::DuplicateId: return "a subthread with id '" + detail + "' already exists";
        case Kind::UnknownTool: return "tool '" + detail + "' is not available to subthreads";
        case Kind::EmptyGoal: return "the subthread target must not be empty";
        case Kind::InvalidId:
            return "invalid subthread id '" + detail +
                   "' (must be 1-128 characters without whitespace and not 'main')";
    }
    return "rejected";
}

std::variant<Tcb, SeedRejection> validate_tcb_seed(const TcbSeed& seed,
                                                   const std::set<std::string>& existing_ids,
                                                   const std::set<std::string>& eligible_tools,
                                                   Timestamp now) {
    using Kind = SeedRejection::Kind;
    auto id = ThreadId::make(seed.id);
    if (!id) return SeedRejection{Kind::InvalidId, seed.id};
    if (existing_ids.contains(seed.id)) return SeedRejection{Kind::DuplicateId, seed.id};
    if (blank(seed.goal)) return SeedRejection{Kind::EmptyGoal, {}};
    for (const auto& tool : seed.allowed_tools) {
        if (!eligible_tools.contains(tool)) return SeedRejection{Kind::UnknownTool, tool};
    }
    Tcb tcb{.id = *id,
            .goal = seed.goal,
            .state = ThreadState::Running,
            .allowed_tools = seed.allowed_tools,
            .prefix_context = seed.prefix_context,
            .extra_info = seed.extra_info,
            .start_time = now,
            .end_time = std::nullopt,
            .result = std::nullopt};
    return tcb;
}

std::string_view to_string(Role r) noexcept {
    switch (r) {
        case Role::System: return "system";
        case Role::Assistant: return "assistant";
        case Role::Environment: return "environment";
    }
    return "system";
}

std::optional<Role> role_from_string(std::string_view s) noexcept {
    if (s == "system") return Role::System;
    if (s == "assistant") return Role::Assistant;
    if (s == "environment") return Role::Environment;
    return std::nullopt;
}

ContextWindow::ContextWindow(Owner owner, std::size_t budget, TokenCounter counter)
    : owner_(std::move(owner)), budget_(budget), counter_(std::move(counter)) {}

std::size_t ContextWindow::total_tokens() const noexcept {
    return std::accumulate(messages_.begin(), messages_.end(), std::size_t{0},
                           [](std::size_t acc, const Message& m) { return acc + m.token_count; });
}

void ContextWindow::push(Role role, std::string content, std::optional<TcbSpan> span) {
    Message m;
    m.role = role;
    m.token_count = counter_(content);
    m.content = std::move(content);
    m.provenance = owner_.name();
    m.tcb_span = span;
    messages_.push_back(std::move(m));
}

void ContextWindow::rewrite(std::size_t i, std::string content, std::optional<TcbSpan> span) {
    Message& m = messages_.at(i);
    m.token_count = counter_(content);
    m.content = std::move(content);
    m.tcb_span = span;
}

void ContextWindow::truncate(std::size_t keep) {
    if (keep < messages_.size()) messages_.resize(keep);
}

std::string_view ToolCall::name() const noexcept {
    return std::holds_alternative<SearchCall>(call) ? "search" : "visit";
}

std::string_view act_name(const Act& act) noexcept {
    struct Visitor {
        std::string_view operator()(const ToolCall& c) const { return c.name(); }
        std::string_view operator()(const Branch&) const { return "branch"; }
        std::string_view operator()(const Kill&) const { return "kill"; }
        std::string_view operator()(const Delete&) const { return "delete"; }
        std::string_view operator()(const Sleep&) const { return "sleep"; }
        std::string_view operator()(const Finish&) const { return "finish"; }
    };
    return std::visit(Visitor{}, act);
}

std::string_view to_string(EventKind k) noexcept {
    switch (k) {
        case EventKind::Spawn: return "spawn";
        case EventKind::Kill: return "kill";
        case EventKind::Delete: return "delete";
        case EventKind::Compress: return "compress";
        case EventKind::Inject: return "inject";
    }
    return "spawn";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) noexcept {
    if (s == "spawn") return EventKind::Spawn;
    if (s == "kill") return EventKind::Kill;
    if (s == "delete") return EventKind::Delete;
    if (s == "compress") return EventKind::Compress;
    if (s == "inject") return EventKind::Inject;
    return std::nullopt;
}

std::vector<std::string> validate_config(const RunConfig& config, std::size_t min_prompt_tokens) {
    std::vector<std::string> errors;
    if (config.max_turns <= 0) errors.emplace_back("max_turns must be positive");
    if (config.context_budget == 0) errors.emplace_back("context_budget must be positive");
    if (!(config.compression_threshold > 0.0 && config.compression_threshold <= 1.0)) {
        errors.emplace_back("compression_threshold must be in (0, 1]");
    }
    if (config.max_concurrent_subthreads == 0) errors.emplace_back("max_concurrent_subthreads must be positive");
    if (config.max_generation_tokens == 0) errors.emplace_back("max_generation_tokens must be positive");
    if (config.temperature < 0.0) errors.emplace_back("temperature must be non-negative");
    if (!config.rates.valid()) errors.emplace_back("rate card values must be non-negative (speed positive)");
    if (config.compression_threshold * static_cast<double>(config.context_budget) <=
        static_cast<double>(min_prompt_tokens)) {
        errors.emplace_back("compression_threshold x context_budget (" +
                            std::to_string(config.compression_limit()) +
                            " tokens) must exceed the smallest system prompt (" +
                            std::to_string(min_prompt_tokens) + " tokens)");
    }
    return errors;
}

}  // namespace agentloop
