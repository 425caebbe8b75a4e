#include "agentloop/executor.hpp"

namespace agentloop {

void SimulatedExecutor::submit(OpTicket ticket, Work work) {
    Finished f;
    f.ticket = ticket;
    f.kind = work.kind;
    f.started = now_;
    double duration = 0.0;
    switch (work.kind) {
        case OpKind::Sleep:
            f.outcome = SleepOutcome{};
            duration = work.sleep_seconds;
            break;
        case OpKind::Tool:
            f.outcome = work.run();
            duration = rates_.tool_time(work.tool);
            break;
        case OpKind::Judge:
            f.outcome = work.run();
            break;
        case OpKind::Completion: {
            f.outcome = work.run();
            const auto& out = std::get<CompletionOutcome>(f.outcome);
            if (out.response) {
                duration = static_cast<double>(out.response->prompt_tokens + out.response->generated_tokens) /
                           rates_.tokens_per_second;
            }
            break;
        }
    }
    f.finished = now_ + std::max(0.0, duration);
    pending_.emplace(Key{f.finished, ticket.slot, ticket.seq}, std::move(f));
}

std::optional<Finished> SimulatedExecutor::next() {
    if (pending_.empty()) return std::nullopt;
    auto node = pending_.extract(pending_.begin());
    now_ = std::max(now_, node.mapped().finished);
    return std::move(node.mapped());
}

void SimulatedExecutor::cancel(std::size_t slot) {
    for (auto it = pending_.begin(); it != pending_.end();) {
        it = std::get<1>(it->first) == slot ? pending_.erase(it) : std::next(it);
    }
}

void SimulatedExecutor::wake(std::size_t slot) {
    for (auto it = pending_.begin(); it != pending_.end(); ++it) {
        if (std::get<1>(it->first) != slot || it->second.kind != OpKind::Sleep) continue;
        auto node = pending_.extract(it);
        node.mapped().finished = now_;
        node.key() = Key{now_, slot, node.mapped().ticket.seq};
        pending_.insert(std::move(node));
        return;
    }
}

RealExecutor::RealExecutor() : origin_(std::chrono::steady_clock::now()) {}

RealExecutor::~RealExecutor() {
    {
        std::lock_guard lk(mu_);
        stopping_ = true;
        live_.clear();
    }
    sleep_cv_.notify_all();
    for (auto& t : workers_) {
        if (t.joinable()) t.join();
    }
}

Timestamp RealExecutor::now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
}

void RealExecutor::submit(OpTicket ticket, Work work) {
    {
        std::lock_guard lk(mu_);
        live_.insert(ticket);
    }
    workers_.emplace_back([this, ticket, work = std::move(work)] {
        Finished f;
        f.ticket = ticket;
        f.kind = work.kind;
        f.started = now();
        if (work.kind == OpKind::Sleep) {
            std::unique_lock lk(mu_);
            sleep_cv_.wait_for(lk, std::chrono::duration<double>(work.sleep_seconds), [&] {
                return stopping_ || woken_.contains(ticket.slot) || !live_.contains(ticket);
            });
            woken_.erase(ticket.slot);
            f.outcome = SleepOutcome{};
        } else {
            f.outcome = work.run();
        }
        f.finished = now();
        {
            std::lock_guard lk(mu_);
            if (live_.contains(ticket)) results_.push_back(std::move(f));
        }
        done_cv_.notify_all();
    });
}

std::optional<Finished> RealExecutor::next() {
    std::unique_lock lk(mu_);
    for (;;) {
        while (!results_.empty()) {
            Finished f = std::move(results_.front());
            results_.pop_front();
            if (live_.erase(f.ticket) > 0) return f;
        }
        if (live_.empty()) return std::nullopt;
        done_cv_.wait(lk, [&] { return !results_.empty() || live_.empty(); });
    }
}

void RealExecutor::cancel(std::size_t slot) {
    {
        std::lock_guard lk(mu_);
        for (auto it = live_.begin(); it != live_.end();) {
            it = it->slot == slot ? live_.erase(it) : std::next(it);
        }
    }
    sleep_cv_.notify_all();
    done_cv_.notify_all();
}

void RealExecutor::wake(std::size_t slot) {
    {
        std::lock_guard lk(mu_);
        woken_.insert(slot);
    }
    sleep_cv_.notify_all();
}

}  // namespace agentloop
