#include "agentloop/metrics.hpp"

#include <algorithm>
#include <map>

#include "agentloop/protocol.hpp"
#include "agentloop/trajectory_io.hpp"

namespace agentloop {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string_view strip_marker(std::string_view line) {
    if (line.starts_with("- ") || line.starts_with("* ")) return trim(line.substr(2));
    std::size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i > 0 && i + 1 < line.size() && (line[i] == '.' || line[i] == ')') && line[i + 1] == ' ') {
        return trim(line.substr(i + 2));
    }
    return line;
}

std::string render_units(const InfoUnitSet& s) {
    if (s.empty()) return "[None]";
    std::string out;
    for (const auto& u : s.units()) {
        if (!out.empty()) out += "\n";
        out += u;
    }
    return out;
}

std::optional<std::string> ask(const CompletionBackend& judge, std::string prompt) {
    CompletionRequest req;
    req.messages.push_back({Role::Environment, std::move(prompt)});
    req.owner = "judge";
    try {
        return judge.complete(req).text;
    } catch (const EndpointFailure&) {
        return std::nullopt;
    }
}

}  // namespace

InfoUnitSet::InfoUnitSet(std::initializer_list<std::string> units) {
    for (const auto& u : units) insert(u);
}

bool InfoUnitSet::insert(std::string_view unit) {
    const auto t = trim(unit);
    if (t.empty()) return false;
    return units_.emplace(t).second;
}

bool InfoUnitSet::contains(std::string_view unit) const { return units_.contains(std::string(trim(unit))); }

std::optional<double> info_loss(const InfoUnitSet& before, const InfoUnitSet& matched) {
    if (before.empty()) return std::nullopt;
    std::size_t kept = 0;
    for (const auto& u : matched.units()) {
        if (before.units().contains(u)) ++kept;
    }
    return 1.0 - static_cast<double>(kept) / static_cast<double>(before.size());
}

InfoUnitSet parse_unit_lines(std::string_view text) {
    InfoUnitSet out;
    if (trim(text) == "[None]") return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = strip_marker(trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos)));
        if (!line.empty() && line != "[None]") out.insert(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::optional<InfoUnitSet> extract_units(const std::string& context, const std::string& task,
                                         const CompletionBackend& judge) {
    auto text = ask(judge, build_prompt(PromptTemplate::Extraction, {{"task_description", task}, {"context_info", context}}));
    if (!text) return std::nullopt;
    return parse_unit_lines(*text);
}

std::optional<InfoUnitSet> match_units(const InfoUnitSet& a, const InfoUnitSet& b, const CompletionBackend& judge) {
    auto text = ask(judge, build_prompt(PromptTemplate::Union, {{"info_list_a", render_units(a)}, {"info_list_b", render_units(b)}}));
    if (!text) return std::nullopt;
    InfoUnitSet out;
    const InfoUnitSet echoed = parse_unit_lines(*text);
    for (const auto& u : echoed.units()) {
        if (a.contains(u)) out.insert(u);
    }
    return out;
}

std::string_view to_string(ContextChangeKind k) noexcept {
    return k == ContextChangeKind::Compression ? "compression" : "subthread_return";
}

std::vector<ContextChange> context_changes(const std::vector<TrajectoryStep>& steps, const TokenCounter& counter) {
    std::vector<ContextChange> out;
    const Reconstruction rec = reconstruct(steps, counter);
    for (const auto& c : rec.compressions) {
        ContextChange ch;
        ch.event = {ContextChangeKind::Compression, c.owner, c.turn, 0, 0};
        ch.before_text = serialize_prompt(c.before);
        ch.after_text = serialize_prompt(c.after);
        ch.event.before_tokens = counter(ch.before_text);
        ch.event.after_tokens = counter(ch.after_text);
        out.push_back(std::move(ch));
    }
    for (const auto& s : steps) {
        if (s.owner != kMainOwner) continue;
        for (const auto& e : s.events) {
            if (e.kind != EventKind::Inject) continue;
            auto w = rec.windows.find(e.thread);
            if (w == rec.windows.end()) continue;
            ContextChange ch;
            ch.event = {ContextChangeKind::SubthreadReturn, e.thread, s.turn, 0, 0};
            ch.before_text = serialize_prompt(w->second);
            ch.after_text = e.result;
            ch.event.before_tokens = counter(ch.before_text);
            ch.event.after_tokens = counter(ch.after_text);
            out.push_back(std::move(ch));
        }
    }
    return out;
}

std::vector<RetentionEvent> measure_retention(const std::vector<TrajectoryStep>& steps, const std::string& task,
                                              const CompletionBackend& judge, const TokenCounter& counter) {
    std::vector<RetentionEvent> out;
    for (const auto& ch : context_changes(steps, counter)) {
        RetentionEvent ev;
        ev.change = ch.event;
        auto before = extract_units(ch.before_text, task, judge);
        auto after = before ? extract_units(ch.after_text, task, judge) : std::nullopt;
        if (!before || !after) {
            ev.note = "skipped: judge failed during extraction";
            out.push_back(std::move(ev));
            continue;
        }
        ev.before_units = before->size();
        if (before->empty()) {
            ev.note = "skipped: no information units before the change";
            out.push_back(std::move(ev));
            continue;
        }
        auto matched = match_units(*before, *after, judge);
        if (!matched) {
            ev.note = "skipped: judge failed during matching";
            out.push_back(std::move(ev));
            continue;
        }
        ev.matched_units = matched->size();
        ev.loss = info_loss(*before, *matched);
        out.push_back(std::move(ev));
    }
    return out;
}

RunContextStats run_context_stats(const std::vector<TrajectoryStep>& steps) {
    RunContextStats r;
    struct Span {
        Timestamp start = 0.0, end = 0.0;
        std::vector<const TrajectoryStep*> steps;
    };
    std::map<std::string, Span> subs;
    std::vector<std::string> sub_order;
    std::vector<const TrajectoryStep*> main;
    for (const auto& s : steps) {
        for (const auto& e : s.events) {
            if (e.kind == EventKind::Compress || e.kind == EventKind::Inject) ++r.change_count;
        }
        if (s.owner == kMainOwner) {
            main.push_back(&s);
            continue;
        }
        auto [it, fresh] = subs.try_emplace(s.owner);
        if (fresh) {
            it->second.start = s.sim_time_start;
            sub_order.push_back(s.owner);
        }
        it->second.start = std::min(it->second.start, s.sim_time_start);
        it->second.end = std::max(it->second.end, s.sim_time_end);
        it->second.steps.push_back(&s);
    }
    r.turns = main.size();
    for (const auto* m : main) r.peak_len = std::max(r.peak_len, m->prompt_tokens);
    if (!main.empty()) r.final_len = main.back()->prompt_tokens;

    // Slot assignment: lowest slot free at the subthread's first step.
    std::stable_sort(sub_order.begin(), sub_order.end(), [&](const std::string& a, const std::string& b) {
        return subs[a].start < subs[b].start;
    });
    std::map<std::string, std::size_t> slot_of;
    std::vector<Timestamp> slot_free_at;
    for (const auto& name : sub_order) {
        const Span& sp = subs[name];
        std::size_t k = 0;
        while (k < slot_free_at.size() && slot_free_at[k] > sp.start) ++k;
        if (k == slot_free_at.size()) slot_free_at.push_back(0.0);
        slot_free_at[k] = sp.end;
        slot_of[name] = k;
    }

    for (const auto* m : main) {
        r.series.push_back({m->turn, "Main", m->prompt_tokens});
        std::vector<std::pair<std::size_t, std::size_t>> live;
        for (const auto& name : sub_order) {
            const Span& sp = subs[name];
            if (sp.start > m->sim_time_start || sp.end < m->sim_time_start) continue;
            const TrajectoryStep* latest = nullptr;
            for (const auto* st : sp.steps) {
                if (st->sim_time_start <= m->sim_time_start) latest = st;
            }
            if (latest) live.emplace_back(slot_of[name], latest->prompt_tokens);
        }
        std::sort(live.begin(), live.end());
        for (const auto& [slot, tokens] : live) r.series.push_back({m->turn, "C" + std::to_string(slot + 1), tokens});
    }
    return r;
}

ContextStats context_stats(const std::vector<std::vector<TrajectoryStep>>& runs) {
    ContextStats out;
    if (runs.empty()) {
        out.warnings.push_back("no trajectories supplied; all statistics are zero");
        return out;
    }
    for (const auto& steps : runs) {
        out.runs.push_back(run_context_stats(steps));
        const auto& r = out.runs.back();
        out.change_count += static_cast<double>(r.change_count);
        out.avg_peak_len += static_cast<double>(r.peak_len);
        out.avg_final_len += static_cast<double>(r.final_len);
        out.turns += static_cast<double>(r.turns);
        if (r.final_len > r.peak_len) out.warnings.push_back("final length exceeds peak length");
    }
    const double n = static_cast<double>(runs.size());
    out.change_count /= n;
    out.avg_peak_len /= n;
    out.avg_final_len /= n;
    out.turns /= n;
    return out;
}

std::string series_csv(const std::vector<SeriesRow>& rows) {
    std::string out = "turn,thread_slot,tokens\n";
    for (const auto& r : rows) out += std::to_string(r.turn) + "," + r.slot + "," + std::to_string(r.tokens) + "\n";
    return out;
}

}  // namespace agentloop
