#include "agentloop/trajectory_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "agentloop/protocol.hpp"

namespace agentloop {

using ojson = nlohmann::ordered_json;

namespace {

ojson span_json(const TcbSpan& s) { return ojson{{"offset", s.offset}, {"length", s.length}}; }

TcbSpan span_from(const ojson& j) { return {j.at("offset").get<std::size_t>(), j.at("length").get<std::size_t>()}; }

ojson event_json(const StepEvent& e) {
    ojson j;
    j["kind"] = std::string(to_string(e.kind));
    switch (e.kind) {
        case EventKind::Spawn:
        case EventKind::Delete: j["thread"] = e.thread; break;
        case EventKind::Kill:
            j["thread"] = e.thread;
            j["mode"] = e.mode;
            break;
        case EventKind::Compress:
            j["mode"] = e.mode;
            j["before_tokens"] = e.before_tokens;
            j["after_tokens"] = e.after_tokens;
            break;
        case EventKind::Inject:
            j["thread"] = e.thread;
            j["state"] = e.state;
            j["result"] = e.result;
            break;
    }
    return j;
}

StepEvent event_from(const ojson& j) {
    StepEvent e;
    auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown event kind");
    e.kind = *kind;
    e.thread = j.value("thread", "");
    e.mode = j.value("mode", "");
    e.before_tokens = j.value("before_tokens", std::size_t{0});
    e.after_tokens = j.value("after_tokens", std::size_t{0});
    e.state = j.value("state", "");
    e.result = j.value("result", "");
    return e;
}

}  // namespace

std::string to_json_line(const TrajectoryStep& s) {
    ojson j;
    j["owner"] = s.owner;
    j["turn"] = s.turn;
    j["raw_output"] = s.raw_output;
    j["act_kind"] = s.act_kind;
    j["act_args_digest"] = s.act_args_digest;
    j["observation"] = s.observation;
    j["prompt_tokens"] = s.prompt_tokens;
    j["generated_tokens"] = s.generated_tokens;
    j["sim_time_start"] = s.sim_time_start;
    j["sim_time_end"] = s.sim_time_end;
    ojson events = ojson::array();
    for (const auto& e : s.events) events.push_back(event_json(e));
    j["events"] = std::move(events);
    if (s.tool) j["tool"] = *s.tool;
    if (s.sleep_seconds > 0) j["sleep_seconds"] = s.sleep_seconds;
    j["prompt_digest"] = s.prompt_digest;
    if (s.tcb_span) j["tcb_span"] = span_json(*s.tcb_span);
    if (s.forced) j["forced"] = true;
    if (s.system_prompt) j["system_prompt"] = *s.system_prompt;
    if (s.history) {
        ojson h = ojson::array();
        for (const auto& m : *s.history) {
            ojson mj{{"role", std::string(to_string(m.role))}, {"content", m.content}};
            if (m.tcb_span) mj["tcb_span"] = span_json(*m.tcb_span);
            h.push_back(std::move(mj));
        }
        j["history"] = std::move(h);
    }
    if (s.state) j["state"] = *s.state;
    return j.dump(-1, ' ', false, ojson::error_handler_t::replace);
}

std::variant<TrajectoryStep, std::string> from_json_line(std::string_view line) {
    const ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded()) return std::string("not valid JSON");
    if (!j.is_object()) return std::string("record is not an object");
    try {
        TrajectoryStep s;
        s.owner = j.at("owner").get<std::string>();
        s.turn = j.at("turn").get<int>();
        s.raw_output = j.at("raw_output").get<std::string>();
        s.act_kind = j.at("act_kind").get<std::string>();
        s.act_args_digest = j.at("act_args_digest").get<std::string>();
        s.observation = j.at("observation").get<std::string>();
        s.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
        s.generated_tokens = j.at("generated_tokens").get<std::size_t>();
        s.sim_time_start = j.at("sim_time_start").get<double>();
        s.sim_time_end = j.at("sim_time_end").get<double>();
        for (const auto& e : j.at("events")) s.events.push_back(event_from(e));
        if (j.contains("tool")) s.tool = j.at("tool").get<std::string>();
        s.sleep_seconds = j.value("sleep_seconds", 0.0);
        s.prompt_digest = j.value("prompt_digest", "");
        if (j.contains("tcb_span")) s.tcb_span = span_from(j.at("tcb_span"));
        s.forced = j.value("forced", false);
        if (j.contains("system_prompt")) s.system_prompt = j.at("system_prompt").get<std::string>();
        if (j.contains("history")) {
            std::vector<HistoryMessage> h;
            for (const auto& mj : j.at("history")) {
                auto role = role_from_string(mj.at("role").get<std::string>());
                if (!role) return std::string("unknown role in history");
                HistoryMessage m{*role, mj.at("content").get<std::string>(), std::nullopt};
                if (mj.contains("tcb_span")) m.tcb_span = span_from(mj.at("tcb_span"));
                h.push_back(std::move(m));
            }
            s.history = std::move(h);
        }
        if (j.contains("state")) s.state = j.at("state").get<std::string>();
        return s;
    } catch (const std::exception& e) {
        return std::string("bad record: ") + e.what();
    }
}

std::string serialize_trajectory(const std::vector<TrajectoryStep>& steps) {
    std::string out;
    for (const auto& s : steps) {
        out += to_json_line(s);
        out += '\n';
    }
    return out;
}

void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryStep>& steps) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << serialize_trajectory(steps);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

LoadResult parse_trajectory(std::string_view text) {
    LoadResult r;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        auto parsed = from_json_line(line);
        if (auto* err = std::get_if<std::string>(&parsed)) {
            r.error_line = line_no;
            r.error = *err;
            break;
        }
        r.steps.push_back(std::get<TrajectoryStep>(std::move(parsed)));
    }
    return r;
}

LoadResult read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trajectory(buf.str());
}

Reconstruction reconstruct(const std::vector<TrajectoryStep>& steps, const TokenCounter& counter) {
    Reconstruction r;
    std::map<std::string, ContextWindow> windows;
    constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1);
    for (const auto& s : steps) {
        auto it = windows.find(s.owner);
        if (it == windows.end()) {
            if (!s.system_prompt) {
                r.mismatches.push_back({s.owner, s.turn, s.prompt_digest, "missing system prompt"});
                continue;
            }
            Owner owner = s.owner == kMainOwner ? Owner::main() : Owner::sub(*ThreadId::make(s.owner));
            it = windows.emplace(s.owner, ContextWindow(owner, kUnbounded, counter)).first;
            it->second.push(Role::System, *s.system_prompt);
        }
        ContextWindow& w = it->second;
        if (s.history) {
            CompressionReplay c{s.owner, s.turn, w.messages(), {}};
            w.truncate(1);
            for (const auto& m : *s.history) w.push(m.role, m.content, m.tcb_span);
            c.after = w.messages();
            r.compressions.push_back(std::move(c));
        }
        if (s.forced) w.push(Role::System, std::string(kForcedAnswerNudge));
        const std::string rebuilt = digest_hex(serialize_prompt(w.messages()));
        ++r.prompts_checked;
        if (rebuilt != s.prompt_digest) r.mismatches.push_back({s.owner, s.turn, s.prompt_digest, rebuilt});
        w.push(Role::Assistant, s.raw_output);
        if (!s.observation.empty()) w.push(Role::Environment, s.observation, s.tcb_span);
        if (s.owner == kMainOwner) w = strip_stale_tcb(std::move(w));
    }
    for (const auto& [owner, w] : windows) r.windows[owner] = w.messages();
    return r;
}

std::string render_transcript(const std::vector<TrajectoryStep>& steps) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    for (const auto& s : steps) {
        out << "=== [" << s.sim_time_start << "s - " << s.sim_time_end << "s] " << s.owner << " turn " << s.turn;
        if (s.forced) out << " (forced)";
        out << " :: " << s.act_kind << "\n";
        for (const auto& e : s.events) {
            out << "  * " << to_string(e.kind);
            if (!e.thread.empty()) out << " " << e.thread;
            if (!e.mode.empty()) out << " (" << e.mode << ")";
            if (e.kind == EventKind::Compress) out << " " << e.before_tokens << " -> " << e.after_tokens << " tokens";
            if (e.kind == EventKind::Inject) out << " [" << e.state << "]";
            out << "\n";
        }
        out << "--- model:\n" << s.raw_output << "\n";
        if (!s.observation.empty()) out << "--- observation:\n" << s.observation << "\n";
        if (s.state) out << "--- final state: " << *s.state << "\n";
        out << "\n";
    }
    return out.str();
}

}  // namespace agentloop
