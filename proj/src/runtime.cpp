#include "agentloop/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <iostream>
#include <memory>

namespace agentloop {

Tcb& Registry::add(Tcb tcb, std::size_t slot) {
    used_ids_.insert(tcb.id.str());
    entries_.push_back({std::move(tcb), slot});
    return entries_.back().tcb;
}

Tcb* Registry::find(std::string_view id) {
    for (auto& e : entries_) {
        if (e.tcb.id.str() == id) return &e.tcb;
    }
    return nullptr;
}

const Tcb* Registry::find(std::string_view id) const {
    return const_cast<Registry*>(this)->find(id);
}

std::optional<std::size_t> Registry::slot_of(std::string_view id) const {
    for (const auto& e : entries_) {
        if (e.tcb.id.str() == id) return e.slot;
    }
    return std::nullopt;
}

bool Registry::remove(std::string_view id) {
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->tcb.id.str() != id) continue;
        if (!is_terminal(it->tcb.state)) return false;
        entries_.erase(it);
        return true;
    }
    return false;
}

std::size_t Registry::running_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const Entry& e) {
        return e.tcb.state == ThreadState::Running;
    }));
}

std::vector<Tcb> Registry::snapshot() const {
    std::vector<Tcb> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tcb);
    return out;
}

std::vector<TrajectoryStep> RunResult::records() const {
    std::vector<TrajectoryStep> out = main.steps;
    for (const auto& t : subthreads) out.insert(out.end(), t.steps.begin(), t.steps.end());
    std::stable_sort(out.begin(), out.end(), [](const TrajectoryStep& a, const TrajectoryStep& b) {
        return a.sim_time_end < b.sim_time_end;
    });
    return out;
}

const std::string kTruncationMarker = "[earlier context truncated]\n";

std::vector<HistoryMessage> history_of(const ContextWindow& window) {
    std::vector<HistoryMessage> out;
    const auto& msgs = window.messages();
    for (std::size_t i = 1; i < msgs.size(); ++i) out.push_back({msgs[i].role, msgs[i].content, msgs[i].tcb_span});
    return out;
}

CompletionRequest compression_request(const ContextWindow& window, const std::string& task) {
    std::string recent;
    const auto& msgs = window.messages();
    for (std::size_t i = 1; i < msgs.size(); ++i) {
        if (!recent.empty()) recent += "\n\n";
        recent += std::string(to_string(msgs[i].role)) + ": " + msgs[i].content;
    }
    CompletionRequest req;
    req.messages.push_back(
        {Role::Environment,
         build_prompt(PromptTemplate::Compression, {{"question", task}, {"recent_history_messages", recent}})});
    req.owner = "judge";
    return req;
}

namespace {

std::optional<std::string> extract_summary(const std::string& text) {
    const auto open = text.find("<summary>");
    if (open == std::string::npos) return std::nullopt;
    const auto body_start = open + std::string_view("<summary>").size();
    const auto close = text.find("</summary>", body_start);
    if (close == std::string::npos) return std::nullopt;
    std::string body = text.substr(body_start, close - body_start);
    const auto b = body.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::nullopt;
    const auto e = body.find_last_not_of(" \t\r\n");
    return body.substr(b, e - b + 1);
}

// Longest suffix of `text` that, behind the truncation marker, fits `budget` tokens.
std::string front_truncate(const std::string& text, std::size_t budget, const TokenCounter& counter) {
    std::size_t lo = 0, hi = text.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (counter(kTruncationMarker + text.substr(text.size() - mid)) <= budget) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    // Avoid starting in the middle of a UTF-8 sequence.
    std::size_t start = text.size() - lo;
    while (start < text.size() && (static_cast<unsigned char>(text[start]) & 0xC0) == 0x80) ++start;
    return kTruncationMarker + text.substr(start);
}

struct Block {
    std::size_t index;
    std::string text;
};

std::optional<Block> latest_block(const ContextWindow& window) {
    const auto& msgs = window.messages();
    for (std::size_t i = msgs.size(); i-- > 0;) {
        if (msgs[i].tcb_span) return Block{i, msgs[i].content.substr(msgs[i].tcb_span->offset, msgs[i].tcb_span->length)};
    }
    return std::nullopt;
}

ContextWindow fallback_window(const ContextWindow& window, std::size_t limit) {
    const auto& msgs = window.messages();
    const auto& counter = window.counter();
    ContextWindow out(window.owner(), window.budget(), counter);
    out.push(msgs[0].role, msgs[0].content, msgs[0].tcb_span);

    const auto block = latest_block(window);
    std::vector<Message> rest(msgs.begin() + 1, msgs.end());
    if (block) {
        // The block is re-attached at the end, so drop it from its original place.
        Message& m = rest[block->index - 1];
        m.content.erase(m.tcb_span->offset, m.tcb_span->length);
        m.tcb_span.reset();
        m.token_count = counter(m.content);
    }

    const std::size_t system_tokens = msgs[0].token_count;
    const std::size_t non_system = window.total_tokens() - system_tokens;
    const std::size_t block_tokens = block ? counter("\n" + block->text) : 0;
    std::size_t budget = non_system / 4;
    const std::size_t room = limit > system_tokens + block_tokens ? limit - system_tokens - block_tokens : 0;
    budget = std::min(budget, room);
    const std::size_t marker_tokens = counter(kTruncationMarker);
    budget = budget > marker_tokens ? budget - marker_tokens : 0;

    std::size_t used = 0;
    std::size_t first = rest.size();
    while (first > 0 && used + rest[first - 1].token_count <= budget) {
        used += rest[first - 1].token_count;
        --first;
    }
    std::vector<Message> kept(rest.begin() + static_cast<std::ptrdiff_t>(first), rest.end());
    if (kept.empty() && !rest.empty() && budget > 0) {
        Message last = rest.back();
        last.content = front_truncate(last.content, budget + marker_tokens, counter);
        kept.push_back(std::move(last));
    } else if (!kept.empty() && first > 0) {
        kept.front().content = kTruncationMarker + kept.front().content;
    }

    for (std::size_t i = 0; i < kept.size(); ++i) {
        std::string content = kept[i].content;
        std::optional<TcbSpan> span;
        if (block && i + 1 == kept.size()) {
            content += "\n";
            span = TcbSpan{content.size(), block->text.size()};
            content += block->text;
        }
        out.push(kept[i].role, std::move(content), span);
    }
    if (block && kept.empty()) {
        out.push(Role::Environment, block->text, TcbSpan{0, block->text.size()});
    }
    return out;
}

}  // namespace

CompressionOutcome apply_compression(const ContextWindow& window, const std::optional<std::string>& judge_text,
                                     std::size_t limit) {
    StepEvent ev;
    ev.kind = EventKind::Compress;
    ev.before_tokens = window.total_tokens();

    std::optional<ContextWindow> rebuilt;
    if (judge_text) {
        if (auto summary = extract_summary(*judge_text)) {
            ContextWindow w(window.owner(), window.budget(), window.counter());
            const auto& sys = window.messages()[0];
            w.push(sys.role, sys.content, sys.tcb_span);
            std::string content = "<summary>\n" + *summary + "\n</summary>";
            std::optional<TcbSpan> span;
            if (auto block = latest_block(window)) {
                content += "\n";
                span = TcbSpan{content.size(), block->text.size()};
                content += block->text;
            }
            w.push(Role::Environment, std::move(content), span);
            if (w.total_tokens() <= limit) rebuilt = std::move(w);
        }
    }
    ev.mode = rebuilt ? "summary" : "fallback";
    ContextWindow out = rebuilt ? std::move(*rebuilt) : fallback_window(window, limit);
    ev.after_tokens = out.total_tokens();
    auto history = history_of(out);
    return {std::move(out), ev, std::move(history)};
}

CompressionOutcome compress_context(const ContextWindow& window, const std::string& task,
                                    const CompletionBackend* judge, std::size_t limit) {
    if (window.total_tokens() <= limit) return {window, std::nullopt, history_of(window)};
    std::optional<std::string> text;
    if (judge) {
        try {
            text = judge->complete(compression_request(window, task)).text;
        } catch (const EndpointFailure&) {
        }
    }
    return apply_compression(window, text, limit);
}

namespace {

std::string format_seconds_short(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", s);
    return buf;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += sep;
        out += p;
    }
    return out;
}

// Removes every <tool_call>...</tool_call> span and trims.
std::string strip_tool_calls(std::string text) {
    for (;;) {
        const auto open = text.find("<tool_call>");
        if (open == std::string::npos) break;
        const auto close = text.find("</tool_call>", open);
        text.erase(open, close == std::string::npos ? std::string::npos : close + 12 - open);
    }
    const auto b = text.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return text.substr(b, text.find_last_not_of(" \t\r\n") - b + 1);
}

struct Slot {
    Slot(std::size_t idx, Owner o, std::size_t budget, TokenCounter counter)
        : index(idx), owner(o), name(o.name()), window(std::move(o), budget, std::move(counter)) {}

    std::size_t index;
    Owner owner;
    std::string name;
    ContextWindow window;
    Trajectory trajectory;
    std::set<std::string> allowed;
    int turn = 0;
    std::uint64_t seq = 0;
    bool done = false;
    bool forced_turn = false;
    bool sleeping = false;
    bool step_open = false;
    TrajectoryStep step;
    std::optional<std::string> last_output;
    std::optional<std::string> parked_feedback;
};

class Scheduler {
public:
    Scheduler(const std::string& task, const RunConfig& config, const RuntimeDeps& deps, Executor& exec)
        : task_(task), config_(config), deps_(deps), exec_(exec), limit_(config.compression_limit()) {}

    RunResult run() {
        auto& main = new_slot(Owner::main());
        main.allowed = catalog_names();
        main.window.push(Role::System, build_prompt(PromptTemplate::Main, {{"user_task", task_}}));
        begin_turn(main);
        while (auto f = exec_.next()) on_finished(*f);
        return collect();
    }

private:
    Slot& new_slot(Owner owner) {
        slots_.push_back(std::make_unique<Slot>(slots_.size(), std::move(owner), config_.context_budget, deps_.counter));
        slots_.back()->trajectory.owner = slots_.back()->name;
        return *slots_.back();
    }

    Slot& main_slot() { return *slots_.front(); }

    OpTicket ticket(Slot& s) { return {s.index, ++s.seq}; }

    void begin_turn(Slot& s) {
        if (s.done) return;
        ++s.turn;
        if (s.turn > config_.max_turns) {
            if (!s.owner.is_main()) {
                finish_sub(s, ThreadState::Failed,
                           s.last_output.value_or("Subthread reached the turn limit without an answer."));
                return;
            }
            s.forced_turn = true;
        }
        s.step = TrajectoryStep{};
        s.step.owner = s.name;
        s.step.turn = s.turn;
        s.step.forced = s.forced_turn;
        s.step.sim_time_start = exec_.now();
        if (s.turn == 1) s.step.system_prompt = s.window.messages().front().content;
        s.step_open = true;

        if (s.window.total_tokens() > limit_) {
            if (deps_.judge) {
                const CompletionBackend* judge = deps_.judge;
                auto req = compression_request(s.window, task_);
                Work w;
                w.kind = OpKind::Judge;
                w.run = [judge, req = std::move(req)]() -> OpOutcome {
                    try {
                        return CompletionOutcome{judge->complete(req), {}};
                    } catch (const EndpointFailure& e) {
                        return CompletionOutcome{std::nullopt, e.what()};
                    }
                };
                exec_.submit(ticket(s), std::move(w));
                return;
            }
            apply(s, apply_compression(s.window, std::nullopt, limit_));
        }
        submit_completion(s);
    }

    void apply(Slot& s, CompressionOutcome out) {
        s.window = std::move(out.window);
        if (out.event) s.step.events.push_back(*out.event);
        s.step.history = std::move(out.history);
    }

    void submit_completion(Slot& s) {
        if (s.forced_turn) s.window.push(Role::System, std::string(kForcedAnswerNudge));
        if (deps_.observer) {
            PromptView view;
            view.owner = s.name;
            view.turn = s.turn;
            view.forced = s.forced_turn;
            view.window = &s.window;
            view.registry = registry_.snapshot();
            view.compression_limit = limit_;
            view.now = exec_.now();
            deps_.observer->on_prompt(view);
        }
        s.step.prompt_digest = digest_hex(serialize_prompt(s.window.messages()));

        CompletionRequest req;
        for (const auto& m : s.window.messages()) req.messages.push_back({m.role, m.content});
        req.max_generation_tokens = config_.max_generation_tokens;
        req.temperature = config_.temperature;
        req.stop_markers = {"</tool_call>", "</answer>"};
        req.owner = s.name;
        req.turn = s.turn;

        Work w;
        w.kind = OpKind::Completion;
        w.run = [policy = deps_.policy, retry = deps_.retry, sleeper = exec_.sleeper(),
                 req = std::move(req)]() -> OpOutcome {
            try {
                auto resp = complete_with_retry(*policy, req, retry, sleeper);
                return CompletionOutcome{std::move(resp), {}};
            } catch (const EndpointFailure& e) {
                return CompletionOutcome{std::nullopt, e.what()};
            }
        };
        exec_.submit(ticket(s), std::move(w));
    }

    void on_finished(Finished& f) {
        Slot& s = *slots_.at(f.ticket.slot);
        if (s.done) return;
        switch (f.kind) {
            case OpKind::Judge: {
                auto& out = std::get<CompletionOutcome>(f.outcome);
                std::optional<std::string> text;
                if (out.response) text = out.response->text;
                apply(s, apply_compression(s.window, text, limit_));
                submit_completion(s);
                break;
            }
            case OpKind::Completion: on_completion(s, std::get<CompletionOutcome>(f.outcome)); break;
            case OpKind::Tool: end_turn(s, std::get<ToolResult>(f.outcome).text); break;
            case OpKind::Sleep: {
                s.sleeping = false;
                const double slept = f.finished - f.started;
                s.step.sleep_seconds = slept;
                end_turn(s, "Slept for " + format_seconds_short(slept) + " seconds.");
                break;
            }
        }
    }

    void on_completion(Slot& s, CompletionOutcome& out) {
        if (!out.response) {
            s.step.act_kind = "endpoint_error";
            s.step.act_args_digest = digest_hex("");
            if (s.owner.is_main()) {
                abort_run(out.error);
            } else {
                finish_sub(s, ThreadState::Failed, "Subthread failed: " + out.error);
            }
            return;
        }
        const CompletionResponse& resp = *out.response;
        s.window.push(Role::Assistant, resp.text);
        s.step.raw_output = resp.text;
        s.step.prompt_tokens = resp.prompt_tokens;
        s.step.generated_tokens = resp.generated_tokens;
        s.last_output = resp.text;

        const auto parsed = parse_action(resp.text, catalog_names());
        if (s.forced_turn) {
            std::string answer;
            if (const auto* pa = std::get_if<ParsedAction>(&parsed)) {
                s.step.act_kind = std::string(act_name(pa->action.act));
                s.step.act_args_digest = digest_hex(canonical_arguments(pa->action.act));
                if (const auto* fin = std::get_if<Finish>(&pa->action.act)) answer = fin->answer;
            } else {
                s.step.act_kind = "parse_error";
                s.step.act_args_digest = digest_hex("");
            }
            if (answer.empty()) answer = strip_tool_calls(resp.text);
            finish_main(answer, true);
            return;
        }
        if (const auto* err = std::get_if<ParseError>(&parsed)) {
            s.step.act_kind = "parse_error";
            s.step.act_args_digest = digest_hex("");
            end_turn(s, err->message());
            return;
        }
        const auto& pa = std::get<ParsedAction>(parsed);
        for (const auto& w : pa.warnings) std::clog << "agentloop: " << s.name << " turn " << s.turn << ": " << w << "\n";
        const Act& act = pa.action.act;
        s.step.act_kind = std::string(act_name(act));
        s.step.act_args_digest = digest_hex(canonical_arguments(act));

        if (const auto* fin = std::get_if<Finish>(&act)) {
            if (s.owner.is_main()) {
                finish_main(fin->answer, false);
            } else {
                finish_sub(s, ThreadState::Successful, fin->answer);
            }
            return;
        }
        if (const auto* call = std::get_if<ToolCall>(&act)) {
            const std::string name(call->name());
            if (!s.allowed.contains(name)) {
                end_turn(s, permission_denied_text(name));
                return;
            }
            s.step.tool = name;
            Work w;
            w.kind = OpKind::Tool;
            w.tool = name;
            w.run = [call = *call, allowed = s.allowed, tools = deps_.tools]() -> OpOutcome {
                return dispatch(call, allowed, *tools);
            };
            exec_.submit(ticket(s), std::move(w));
            return;
        }
        if (!s.owner.is_main()) {
            end_turn(s, permission_denied_text(act_name(act)));
            return;
        }
        if (const auto* br = std::get_if<Branch>(&act)) {
            end_turn(s, branch(s, *br));
        } else if (const auto* k = std::get_if<Kill>(&act)) {
            end_turn(s, kill(s, k->id));
        } else if (const auto* d = std::get_if<Delete>(&act)) {
            end_turn(s, remove(s, d->id));
        } else if (const auto* sl = std::get_if<Sleep>(&act)) {
            s.sleeping = true;
            Work w;
            w.kind = OpKind::Sleep;
            w.sleep_seconds = sl->seconds;
            exec_.submit(ticket(s), std::move(w));
        }
    }

    std::string branch(Slot& main, const Branch& br) {
        std::vector<std::string> lines;
        for (const auto& seed : br.seeds) {
            auto checked = validate_tcb_seed(seed, registry_.used_ids(), subthread_eligible_tools(), exec_.now());
            if (const auto* rej = std::get_if<SeedRejection>(&checked)) {
                lines.push_back("Error: cannot create subthread '" + seed.id + "': " + rej->message());
                continue;
            }
            if (registry_.running_count() >= config_.max_concurrent_subthreads) {
                lines.push_back("Error: cannot create subthread '" + seed.id + "': concurrency limit of " +
                                std::to_string(config_.max_concurrent_subthreads) + " running subthreads reached");
                continue;
            }
            Tcb tcb = std::get<Tcb>(std::move(checked));
            Slot& sub = new_slot(Owner::sub(tcb.id));
            sub.allowed = {tcb.allowed_tools.begin(), tcb.allowed_tools.end()};
            PromptSlots slots{{"goal", tcb.goal},
                              {"allowed_tools", join(tcb.allowed_tools, ", ")},
                              {"assigned_context", tcb.prefix_context.empty() ? "None" : tcb.prefix_context}};
            if (tcb.extra_info) slots["extra_info"] = *tcb.extra_info;
            sub.window.push(Role::System, build_prompt(PromptTemplate::Sub, slots));
            main.step.events.push_back({EventKind::Spawn, tcb.id.str(), "", 0, 0, "", ""});
            lines.push_back("Subthread " + tcb.id.str() + " created.");
            spawn_order_.push_back(sub.index);
            registry_.add(std::move(tcb), sub.index);
            begin_turn(sub);
        }
        return join(lines, "\n");
    }

    void kill_slot(Tcb& tcb, std::size_t slot) {
        tcb.transition(ThreadState::Killed, exec_.now(), std::nullopt);
        all_tcbs_.insert_or_assign(slot, tcb);
        Slot& s = *slots_[slot];
        s.done = true;
        s.step_open = false;
        exec_.cancel(slot);
    }

    std::string kill(Slot& main, const std::string& id) {
        Tcb* tcb = registry_.find(id);
        if (!tcb) return "Error: no such thread: " + id;
        if (tcb->state != ThreadState::Running) {
            return "Subthread " + id + " already finished (Status: " + std::string(status_label(tcb->state)) +
                   "); nothing to kill.";
        }
        kill_slot(*tcb, *registry_.slot_of(id));
        main.step.events.push_back({EventKind::Kill, id, "requested", 0, 0, "", ""});
        return "Subthread " + id + " killed.";
    }

    std::string remove(Slot& main, const std::string& id) {
        const Tcb* tcb = registry_.find(id);
        if (!tcb) return "Error: no such thread: " + id;
        if (tcb->state == ThreadState::Running) return "Error: subthread " + id + " is still running; kill it first.";
        registry_.remove(id);
        main.step.events.push_back({EventKind::Delete, id, "", 0, 0, "", ""});
        return "Subthread " + id + " deleted from the TCB list.";
    }

    void end_turn(Slot& s, std::string feedback) {
        if (s.done) return;
        if (s.owner.is_main() && config_.blocking_subthreads && registry_.running_count() > 0) {
            s.parked_feedback = std::move(feedback);
            return;
        }
        Observation obs;
        obs.tool_feedback = std::move(feedback);
        if (s.owner.is_main()) {
            while (!mailbox_.empty()) {
                const InjectedResult r = mailbox_.front();
                mailbox_.pop_front();
                s.step.events.push_back({EventKind::Inject, r.id, "", 0, 0, std::string(to_string(r.state)), r.result});
                obs.injected_results.push_back(r);
            }
            const Timestamp now = exec_.now();
            for (const auto& tcb : registry_.snapshot()) obs.tcb_snapshot.push_back(render_tcb(tcb, now));
        }
        auto rendered = render_observation(obs);
        s.window.push(Role::Environment, rendered.text, rendered.tcb_span);
        if (s.owner.is_main()) s.window = strip_stale_tcb(std::move(s.window));
        s.step.observation = std::move(rendered.text);
        s.step.tcb_span = rendered.tcb_span;
        close_step(s);
        begin_turn(s);
    }

    void close_step(Slot& s) {
        if (!s.step_open) return;
        s.step.sim_time_end = exec_.now();
        s.trajectory.steps.push_back(std::move(s.step));
        s.step = TrajectoryStep{};
        s.step_open = false;
    }

    void finish_sub(Slot& s, ThreadState state, std::string result) {
        Tcb* tcb = registry_.find(s.name);
        tcb->transition(state, exec_.now(), result);
        all_tcbs_.insert_or_assign(s.index, *tcb);
        const std::string label(to_string(state));
        if (s.step_open) {
            s.step.state = label;
            close_step(s);
        } else if (!s.trajectory.steps.empty()) {
            s.trajectory.steps.back().state = label;
        }
        if (state == ThreadState::Successful) s.trajectory.final_answer = result;
        s.done = true;
        InjectedResult posted{s.name, state, std::move(result), exec_.now()};
        mailbox_.push_back(posted);
        posted_.push_back(std::move(posted));

        Slot& main = main_slot();
        if (main.done) return;
        if (main.parked_feedback && registry_.running_count() == 0) {
            std::string fb = std::move(*main.parked_feedback);
            main.parked_feedback.reset();
            end_turn(main, std::move(fb));
        } else if (main.sleeping && config_.sleep_wakes_on_result) {
            exec_.wake(main.index);
        }
    }

    void shutdown_subthreads(Slot& main) {
        for (std::size_t idx : spawn_order_) {
            Slot& sub = *slots_[idx];
            if (sub.done) continue;
            Tcb* tcb = registry_.find(sub.name);
            if (!tcb) continue;
            kill_slot(*tcb, idx);
            main.step.events.push_back({EventKind::Kill, sub.name, "shutdown", 0, 0, "", ""});
        }
    }

    void finish_main(std::string answer, bool forced) {
        Slot& main = main_slot();
        shutdown_subthreads(main);
        close_step(main);
        main.trajectory.final_answer = answer;
        main.trajectory.forced = forced;
        main.done = true;
        exec_.cancel(main.index);
    }

    void abort_run(std::string reason) {
        Slot& main = main_slot();
        shutdown_subthreads(main);
        close_step(main);
        aborted_ = true;
        abort_reason_ = std::move(reason);
        main.done = true;
        exec_.cancel(main.index);
    }

    RunResult collect() {
        RunResult r;
        Slot& main = main_slot();
        r.final_answer = main.trajectory.final_answer;
        r.forced = main.trajectory.forced;
        r.aborted = aborted_;
        r.abort_reason = abort_reason_;
        r.main = main.trajectory;
        r.windows.push_back(main.window);
        Timestamp end = main.trajectory.steps.empty() ? 0.0 : main.trajectory.steps.back().sim_time_end;
        for (std::size_t idx : spawn_order_) {
            Slot& sub = *slots_[idx];
            r.subthreads.push_back(sub.trajectory);
            r.windows.push_back(sub.window);
            if (auto it = all_tcbs_.find(idx); it != all_tcbs_.end()) {
                r.tcbs.push_back(it->second);
                if (it->second.end_time) end = std::max(end, *it->second.end_time);
            } else if (const Tcb* tcb = registry_.find(sub.name)) {
                r.tcbs.push_back(*tcb);
            }
        }
        r.registry = registry_.snapshot();
        r.posted = posted_;
        r.makespan = end;
        return r;
    }

    const std::string& task_;
    const RunConfig& config_;
    const RuntimeDeps& deps_;
    Executor& exec_;
    const std::size_t limit_;

    std::vector<std::unique_ptr<Slot>> slots_;
    std::vector<std::size_t> spawn_order_;
    std::map<std::size_t, Tcb> all_tcbs_;
    Registry registry_;
    std::deque<InjectedResult> mailbox_;
    std::vector<InjectedResult> posted_;
    bool aborted_ = false;
    std::string abort_reason_;
};

}  // namespace

RunResult run_main(const std::string& task, const RunConfig& config, const RuntimeDeps& deps, Executor& executor) {
    if (!deps.policy || !deps.tools) throw std::invalid_argument("run_main needs a policy and a tool backend");
    Scheduler scheduler(task, config, deps, executor);
    return scheduler.run();
}

RunResult run_main(const std::string& task, const RunConfig& config, const RuntimeDeps& deps) {
    if (config.clock == ClockKind::Real) {
        RealExecutor exec;
        return run_main(task, config, deps, exec);
    }
    SimulatedExecutor exec(config.rates);
    return run_main(task, config, deps, exec);
}

}  // namespace agentloop
