#pragma once

// Plain-text tag protocol between the runtime and the model: parsing raw
// completions into actions, rendering observations and TCB lists, and
// instantiating the prompt templates.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentloop/model.hpp"

namespace agentloop {

inline constexpr std::string_view kTcbElided = "[TCB list elided]";
inline constexpr std::string_view kTcbListHeader = "TCB List:";
inline constexpr std::size_t kAssignedContextPreview = 200;
inline constexpr std::string_view kForcedAnswerNudge =
    "You have reached the maximum number of turns. Produce your final answer now, enclosed within "
    "<answer></answer> tags. Do not call any tools.";

enum class ParseErrorKind { NoActFound, MalformedCall, UnknownName, ArgSchemaViolation };
std::string_view to_string(ParseErrorKind k) noexcept;

struct ParseError {
    ParseErrorKind kind;
    std::string detail;

    /// Text fed back to the model as the next observation.
    std::string message() const;
};

struct ParsedAction {
    Action action;
    std::vector<std::string> warnings;
};

using ParseOutcome = std::variant<ParsedAction, ParseError>;

/// Total over arbitrary input. `<answer>` outranks `<tool_call>`; only the
/// first `<tool_call>` span is honored (extra spans produce a warning).
ParseOutcome parse_action(std::string_view raw, const std::set<std::string>& catalog);

/// Canonical completion text carrying `action`; parse_action inverts it.
std::string render_completion(const Action& action);

/// Compact JSON of the act's arguments in canonical key order.
std::string canonical_arguments(const Act& act);

/// 64-bit FNV-1a, lower-case hex.
std::string digest_hex(std::string_view bytes);

/// One TCB summary: Thread ID, Target, Status, Allowed Tools, Assigned
/// Context, Runtime and, for finished threads with a result, Result.
std::string render_tcb(const Tcb& tcb, Timestamp now);

struct RenderedObservation {
    std::string text;
    std::optional<TcbSpan> tcb_span;
};

RenderedObservation render_observation(const Observation& obs);

/// Replaces every TCB block except the most recent with kTcbElided.
ContextWindow strip_stale_tcb(ContextWindow history);

std::size_t count_live_tcb_blocks(const std::vector<Message>& messages);

enum class PromptTemplate { Main, Sub, Compression, Extraction, Union };

using PromptSlots = std::map<std::string, std::string>;

struct MissingSlot : std::invalid_argument {
    explicit MissingSlot(const std::string& slot) : std::invalid_argument("missing prompt slot: " + slot) {}
};

/// Instantiates a template. Required slots. Main: user_task. Sub: goal,
/// allowed_tools, assigned_context (extra_info optional, "None" when absent).
/// Compression: question, recent_history_messages. Extraction:
/// task_description, context_info. Union: info_list_a, info_list_b.
std::string build_prompt(PromptTemplate which, const PromptSlots& slots);

/// Deterministic serialization of a prompt; its digest is what trajectories record.
std::string serialize_prompt(const std::vector<Message>& messages);

}  // namespace agentloop
