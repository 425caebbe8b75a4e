#include "agentloop/protocol.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace agentloop {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
constexpr std::string_view kCallOpen = "<tool_call>";
constexpr std::string_view kCallClose = "</tool_call>";

std::string trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::optional<std::string> think_of(std::string_view prefix) {
    std::string t = trim(prefix);
    if (t.empty()) return std::nullopt;
    return t;
}

ParseError schema(std::string detail) { return ParseError{ParseErrorKind::ArgSchemaViolation, std::move(detail)}; }

// Accepts a string or an array of strings; every element must be non-empty.
std::variant<std::vector<std::string>, ParseError> string_list(const json& args, const char* key, bool allow_scalar) {
    auto it = args.find(key);
    if (it == args.end()) return schema(std::string("missing required argument '") + key + "'");
    std::vector<std::string> out;
    if (it->is_string() && allow_scalar) {
        out.push_back(it->get<std::string>());
    } else if (it->is_array()) {
        for (const auto& v : *it) {
            if (!v.is_string()) return schema(std::string("'") + key + "' items must be strings");
            out.push_back(v.get<std::string>());
        }
    } else {
        return schema(std::string("'") + key + "' must be an array of strings");
    }
    if (out.empty()) return schema(std::string("'") + key + "' needs at least one item (minItems 1)");
    for (const auto& s : out) {
        if (trim(s).empty()) return schema(std::string("'") + key + "' items must be non-empty");
    }
    return out;
}

std::variant<std::string, ParseError> required_string(const json& args, const char* key) {
    auto it = args.find(key);
    if (it == args.end()) return schema(std::string("missing required argument '") + key + "'");
    if (!it->is_string()) return schema(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

std::variant<TcbSeed, ParseError> parse_seed(const json& args) {
    if (!args.is_object()) return schema("each branch seed must be an object");
    TcbSeed seed;
    auto id = required_string(args, "id");
    if (auto* e = std::get_if<ParseError>(&id)) return *e;
    seed.id = std::get<std::string>(id);
    auto target = required_string(args, "target");
    if (auto* e = std::get_if<ParseError>(&target)) return *e;
    seed.goal = std::get<std::string>(target);
    auto tools_it = args.find("allowed_tools");
    if (tools_it == args.end()) return schema("missing required argument 'allowed_tools'");
    if (!tools_it->is_array()) return schema("'allowed_tools' must be an array of strings");
    for (const auto& t : *tools_it) {
        if (!t.is_string()) return schema("'allowed_tools' items must be strings");
        seed.allowed_tools.push_back(t.get<std::string>());
    }
    if (seed.allowed_tools.empty()) return schema("'allowed_tools' needs at least one item (minItems 1)");
    auto ctx = required_string(args, "assigned_context");
    if (auto* e = std::get_if<ParseError>(&ctx)) return *e;
    seed.prefix_context = std::get<std::string>(ctx);
    if (auto it = args.find("extra_info"); it != args.end() && !it->is_null()) {
        if (!it->is_string()) return schema("'extra_info' must be a string");
        seed.extra_info = it->get<std::string>();
    }
    return seed;
}

std::variant<Act, ParseError> parse_act(const std::string& name, const json& args) {
    if (name == "branch") {
        Branch branch;
        if (args.is_array()) {
            if (args.empty()) return schema("branch needs at least one subthread");
            for (const auto& a : args) {
                auto seed = parse_seed(a);
                if (auto* e = std::get_if<ParseError>(&seed)) return *e;
                branch.seeds.push_back(std::move(std::get<TcbSeed>(seed)));
            }
        } else {
            auto seed = parse_seed(args);
            if (auto* e = std::get_if<ParseError>(&seed)) return *e;
            branch.seeds.push_back(std::move(std::get<TcbSeed>(seed)));
        }
        return Act{std::move(branch)};
    }
    if (!args.is_object()) return schema("arguments must be a JSON object");
    if (name == "search") {
        auto q = string_list(args, "query", true);
        if (auto* e = std::get_if<ParseError>(&q)) return *e;
        return Act{ToolCall{SearchCall{std::move(std::get<std::vector<std::string>>(q))}}};
    }
    if (name == "visit") {
        auto urls = string_list(args, "url", true);
        if (auto* e = std::get_if<ParseError>(&urls)) return *e;
        auto goal = required_string(args, "goal");
        if (auto* e = std::get_if<ParseError>(&goal)) return *e;
        if (trim(std::get<std::string>(goal)).empty()) return schema("'goal' must be non-empty");
        return Act{ToolCall{VisitCall{std::move(std::get<std::vector<std::string>>(urls)), std::get<std::string>(goal)}}};
    }
    if (name == "sleep") {
        auto it = args.find("sleep_duration");
        if (it == args.end()) return schema("missing required argument 'sleep_duration'");
        if (!it->is_number()) return schema("'sleep_duration' must be a number");
        const double seconds = it->get<double>();
        if (!std::isfinite(seconds) || seconds <= 0.0 || seconds > kMaxSleepSeconds) {
            return schema("'sleep_duration' must be in (0, 60] seconds");
        }
        return Act{Sleep{seconds}};
    }
    if (name == "kill" || name == "delete") {
        auto id = required_string(args, "id");
        if (auto* e = std::get_if<ParseError>(&id)) return *e;
        if (name == "kill") return Act{Kill{std::get<std::string>(id)}};
        return Act{Delete{std::get<std::string>(id)}};
    }
    return ParseError{ParseErrorKind::UnknownName, name};
}

ordered_json seed_json(const TcbSeed& seed) {
    ordered_json j;
    j["id"] = seed.id;
    j["target"] = seed.goal;
    j["allowed_tools"] = seed.allowed_tools;
    j["assigned_context"] = seed.prefix_context;
    if (seed.extra_info) j["extra_info"] = *seed.extra_info;
    return j;
}

ordered_json arguments_json(const Act& act) {
    struct Visitor {
        ordered_json operator()(const ToolCall& c) const {
            ordered_json j;
            if (const auto* s = std::get_if<SearchCall>(&c.call)) {
                j["query"] = s->queries;
            } else {
                const auto& v = std::get<VisitCall>(c.call);
                j["url"] = v.urls;
                j["goal"] = v.goal;
            }
            return j;
        }
        ordered_json operator()(const Branch& b) const {
            if (b.seeds.size() == 1) return seed_json(b.seeds.front());
            ordered_json arr = ordered_json::array();
            for (const auto& s : b.seeds) arr.push_back(seed_json(s));
            return arr;
        }
        ordered_json operator()(const Kill& k) const { return ordered_json{{"id", k.id}}; }
        ordered_json operator()(const Delete& d) const { return ordered_json{{"id", d.id}}; }
        ordered_json operator()(const Sleep& s) const { return ordered_json{{"sleep_duration", s.seconds}}; }
        ordered_json operator()(const Finish& f) const { return ordered_json{{"answer", f.answer}}; }
    };
    return std::visit(Visitor{}, act);
}

std::string dump(const ordered_json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::string preview(const std::string& text, std::size_t limit) {
    if (text.size() <= limit) return text;
    std::size_t cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut) + "...";
}

std::string format_seconds(double s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1fs", s);
    return buf;
}

}  // namespace

std::string_view to_string(ParseErrorKind k) noexcept {
    switch (k) {
        case ParseErrorKind::NoActFound: return "NoActFound";
        case ParseErrorKind::MalformedCall: return "MalformedCall";
        case ParseErrorKind::UnknownName: return "UnknownName";
        case ParseErrorKind::ArgSchemaViolation: return "ArgSchemaViolation";
    }
    return "NoActFound";
}

std::string ParseError::message() const {
    switch (kind) {
        case ParseErrorKind::NoActFound:
            return "Error: no action found. Call a tool within <tool_call></tool_call> tags or enclose "
                   "your final answer within <answer></answer> tags.";
        case ParseErrorKind::MalformedCall:
            return "Error: malformed tool call (" + detail +
                   "). Return a json object with function name and arguments within <tool_call></tool_call> tags.";
        case ParseErrorKind::UnknownName: return "Error: unknown function name '" + detail + "'.";
        case ParseErrorKind::ArgSchemaViolation: return "Error: invalid arguments: " + detail + ".";
    }
    return "Error";
}

ParseOutcome parse_action(std::string_view raw, const std::set<std::string>& catalog) {
    if (auto open = raw.find(kAnswerOpen); open != std::string_view::npos) {
        const auto body = open + kAnswerOpen.size();
        if (auto close = raw.find(kAnswerClose, body); close != std::string_view::npos) {
            return ParsedAction{Action{think_of(raw.substr(0, open)), Finish{trim(raw.substr(body, close - body))}}, {}};
        }
    }

    const auto open = raw.find(kCallOpen);
    if (open == std::string_view::npos) {
        return ParseError{ParseErrorKind::NoActFound, "neither <answer> nor <tool_call> present"};
    }
    const auto body = open + kCallOpen.size();
    const auto close = raw.find(kCallClose, body);
    if (close == std::string_view::npos) return ParseError{ParseErrorKind::MalformedCall, "unterminated <tool_call>"};

    std::vector<std::string> warnings;
    if (raw.find(kCallOpen, close + kCallClose.size()) != std::string_view::npos) {
        warnings.emplace_back("multiple <tool_call> spans; only the first is honored");
    }

    const json call = json::parse(raw.substr(body, close - body), nullptr, false);
    if (call.is_discarded() || !call.is_object()) {
        return ParseError{ParseErrorKind::MalformedCall, "tool call is not a JSON object"};
    }
    auto name_it = call.find("name");
    if (name_it == call.end() || !name_it->is_string()) {
        return ParseError{ParseErrorKind::MalformedCall, "missing string field 'name'"};
    }
    const std::string name = name_it->get<std::string>();
    if (!catalog.contains(name) || name == "finish") return ParseError{ParseErrorKind::UnknownName, name};

    json args = json::object();
    if (auto it = call.find("arguments"); it != call.end()) {
        args = *it;
        // some models double-encode the arguments object
        if (args.is_string()) {
            json inner = json::parse(args.get<std::string>(), nullptr, false);
            if (inner.is_discarded()) return ParseError{ParseErrorKind::MalformedCall, "arguments string is not JSON"};
            args = std::move(inner);
        }
    }

    auto act = parse_act(name, args);
    if (auto* e = std::get_if<ParseError>(&act)) return *e;
    return ParsedAction{Action{think_of(raw.substr(0, open)), std::move(std::get<Act>(act))}, std::move(warnings)};
}

std::string render_completion(const Action& action) {
    std::string out;
    if (action.think) out += *action.think + "\n";
    if (const auto* f = std::get_if<Finish>(&action.act)) {
        out += std::string(kAnswerOpen) + f->answer + std::string(kAnswerClose);
        return out;
    }
    ordered_json call;
    call["name"] = std::string(act_name(action.act));
    call["arguments"] = arguments_json(action.act);
    out += std::string(kCallOpen) + "\n" + dump(call) + "\n" + std::string(kCallClose);
    return out;
}

std::string canonical_arguments(const Act& act) { return dump(arguments_json(act)); }

std::string digest_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string render_tcb(const Tcb& tcb, Timestamp now) {
    std::string tools;
    for (const auto& t : tcb.allowed_tools) {
        if (!tools.empty()) tools += ", ";
        tools += t;
    }
    std::string out;
    out += "Thread ID: " + tcb.id.str() + "\n";
    out += "Target: " + tcb.goal + "\n";
    out += "Status: " + std::string(status_label(tcb.state)) + "\n";
    out += "Allowed Tools: " + tools + "\n";
    out += "Assigned Context: " +
           (tcb.prefix_context.empty() ? std::string("None") : preview(tcb.prefix_context, kAssignedContextPreview)) +
           "\n";
    out += "Runtime: " + format_seconds(tcb_elapsed(tcb, now));
    if (tcb.state != ThreadState::Running && tcb.result) out += "\nResult: " + *tcb.result;
    return out;
}

RenderedObservation render_observation(const Observation& obs) {
    RenderedObservation out;
    out.text = "<tool_response>" + obs.tool_feedback + "</tool_response>";
    for (const auto& r : obs.injected_results) {
        const bool ok = r.state == ThreadState::Successful;
        out.text += "\nSubthread " + r.id + (ok ? " finished: " : " failed: ") + r.result;
    }
    if (!obs.tcb_snapshot.empty()) {
        out.text += "\n";
        const std::size_t offset = out.text.size();
        std::string block(kTcbListHeader);
        for (const auto& summary : obs.tcb_snapshot) block += "\n\n" + summary;
        out.text += block;
        out.tcb_span = TcbSpan{offset, block.size()};
    }
    return out;
}

ContextWindow strip_stale_tcb(ContextWindow history) {
    const auto& msgs = history.messages();
    std::optional<std::size_t> latest;
    for (std::size_t i = 0; i < msgs.size(); ++i) {
        if (msgs[i].tcb_span) latest = i;
    }
    if (!latest) return history;
    for (std::size_t i = 0; i < *latest; ++i) {
        const Message& m = history.messages()[i];
        if (!m.tcb_span) continue;
        std::string content = m.content;
        content.replace(m.tcb_span->offset, m.tcb_span->length, kTcbElided);
        history.rewrite(i, std::move(content), std::nullopt);
    }
    return history;
}

std::size_t count_live_tcb_blocks(const std::vector<Message>& messages) {
    std::size_t n = 0;
    for (const auto& m : messages) {
        if (m.tcb_span) ++n;
    }
    return n;
}

std::string serialize_prompt(const std::vector<Message>& messages) {
    std::string out;
    for (const auto& m : messages) {
        out += "<|";
        out += to_string(m.role);
        out += "|>\n";
        out += m.content;
        out += "\n";
    }
    return out;
}

}  // namespace agentloop
