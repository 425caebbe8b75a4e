#include <doctest.h>

#include <random>

#include "agentloop/llm_client.hpp"
#include "agentloop/model.hpp"
#include "agentloop/tools.hpp"

using namespace agentloop;

TEST_CASE("thread ids") {
    CHECK(ThreadId::make("T1"));
    CHECK(ThreadId::make("lfp-research_2"));
    CHECK_FALSE(ThreadId::make(""));
    CHECK_FALSE(ThreadId::make("has space"));
    CHECK_FALSE(ThreadId::make("tab\there"));
    CHECK_FALSE(ThreadId::make("main"));
    CHECK(ThreadId::make(std::string(128, 'x')));
    CHECK_FALSE(ThreadId::make(std::string(129, 'x')));
}

TEST_CASE("state transitions") {
    const ThreadState all[] = {ThreadState::Running, ThreadState::Successful, ThreadState::Failed, ThreadState::Killed};
    for (auto from : all) {
        for (auto to : all) {
            CHECK(can_transition(from, to) == (from == ThreadState::Running && to != ThreadState::Running));
        }
        CHECK(thread_state_from_string(to_string(from)) == from);
    }
    CHECK(status_label(ThreadState::Successful) == "Success");
    CHECK_FALSE(thread_state_from_string("done"));
}

TEST_CASE("tcb transition applies once and killed drops the result") {
    Tcb t{*ThreadId::make("T1"), "goal"};
    t.start_time = 1.0;
    CHECK(t.transition(ThreadState::Successful, 3.5, "R"));
    CHECK(t.result == "R");
    CHECK(t.end_time == 3.5);
    CHECK_FALSE(t.transition(ThreadState::Failed, 4.0, "X"));
    CHECK(t.state == ThreadState::Successful);
    CHECK(t.result == "R");
    CHECK(tcb_elapsed(t, 100.0) == doctest::Approx(2.5));

    Tcb k{*ThreadId::make("T2"), "goal"};
    CHECK(k.transition(ThreadState::Killed, 2.0, "ignored"));
    CHECK_FALSE(k.result);
}

TEST_CASE("elapsed is clamped at zero") {
    Tcb t{*ThreadId::make("T1"), "g"};
    t.start_time = 10.0;
    CHECK(tcb_elapsed(t, 5.0) == 0.0);
}

TEST_CASE("seed validation") {
    const auto& eligible = subthread_eligible_tools();
    std::set<std::string> existing{"T1"};
    TcbSeed ok{"T2", "Find X", {"search"}, "ctx", std::nullopt};
    auto v = validate_tcb_seed(ok, existing, eligible, 4.0);
    REQUIRE(std::holds_alternative<Tcb>(v));
    CHECK(std::get<Tcb>(v).state == ThreadState::Running);
    CHECK(std::get<Tcb>(v).start_time == 4.0);

    auto kind = [&](TcbSeed s) { return std::get<SeedRejection>(validate_tcb_seed(s, existing, eligible, 0)).kind; };
    CHECK(kind({"T1", "Find X", {"search"}, "", {}}) == SeedRejection::Kind::DuplicateId);
    CHECK(kind({"T3", "   ", {"search"}, "", {}}) == SeedRejection::Kind::EmptyGoal);
    CHECK(kind({"T3", "g", {"branch"}, "", {}}) == SeedRejection::Kind::UnknownTool);
    CHECK(kind({"T3", "g", {"shell"}, "", {}}) == SeedRejection::Kind::UnknownTool);
    CHECK(kind({"bad id", "g", {"search"}, "", {}}) == SeedRejection::Kind::InvalidId);
}

TEST_CASE("context window keeps token counts consistent") {
    ContextWindow w(Owner::main(), 1000, count_tokens);
    w.push(Role::System, "abcd");
    w.push(Role::Assistant, "abcde");
    CHECK(w.total_tokens() == 1 + 2);
    CHECK(w.messages()[1].provenance == "main");
    w.rewrite(1, "a", std::nullopt);
    CHECK(w.total_tokens() == 2);
    w.truncate(1);
    CHECK(w.messages().size() == 1);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        ContextWindow r(Owner::sub(*ThreadId::make("S")), 1000, count_tokens);
        std::size_t sum = 0;
        const int n = static_cast<int>(rng() % 10);
        for (int k = 0; k < n; ++k) {
            std::string text(rng() % 50, 'x');
            sum += count_tokens(text);
            r.push(Role::Environment, text);
        }
        CHECK(r.total_tokens() == sum);
        for (const auto& m : r.messages()) CHECK(m.provenance == "S");
    }
}

TEST_CASE("config validation") {
    RunConfig c;
    CHECK(validate_config(c, 1500).empty());
    c.context_budget = 1000;
    CHECK_FALSE(validate_config(c, 1500).empty());
    RunConfig d;
    d.max_turns = 0;
    d.compression_threshold = 1.5;
    d.rates.tokens_per_second = 0;
    CHECK(validate_config(d, 10).size() == 3);
}

TEST_CASE("defaults") {
    RunConfig c;
    CHECK(c.max_turns == 30);
    CHECK(c.context_budget == 128000);
    CHECK(c.compression_threshold == 0.9);
    CHECK(c.max_concurrent_subthreads == 8);
    CHECK(c.compression_limit() == 115200);
}
