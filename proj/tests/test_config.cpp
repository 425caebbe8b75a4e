#include <doctest.h>

#include <json.hpp>

#include "agentloop/config.hpp"
#include "agentloop/scenario.hpp"

using namespace agentloop;

TEST_CASE("config overlay") {
    const auto c = load_config_text(R"({"max_turns": 5, "context_budget": 4000, "tool_backend": "live",
                                        "clock": "real", "rates": {"tokens_per_second": 100, "tool_time_seconds": {"visit": 4}}})");
    CHECK(c.max_turns == 5);
    CHECK(c.context_budget == 4000);
    CHECK(c.tool_backend == ToolBackendKind::Live);
    CHECK(c.clock == ClockKind::Real);
    CHECK(c.rates.tokens_per_second == 100);
    CHECK(c.rates.tool_time("visit") == 4);
    CHECK(c.rates.tool_time("search") == 1);
    CHECK(c.compression_threshold == 0.9);

    RunConfig base;
    base.seed = 9;
    CHECK(load_config_text("{}", base).seed == 9);
}

TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(load_config_text(R"({"max_turn": 5})"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_text(R"({"max_turns": "many"})"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_text(R"({"tool_backend": "cloud"})"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_text(R"({"rates": {"speed": 1}})"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_text("[1]"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_text("{"), std::invalid_argument);
    try {
        load_config_text(R"({"bogus": 1})");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
}

TEST_CASE("config json round trip") {
    RunConfig c;
    c.max_turns = 12;
    c.blocking_subthreads = true;
    c.rates.price_per_call["search"] = 0.002;
    const auto back = load_config_text(config_json(c));
    CHECK(back.max_turns == 12);
    CHECK(back.blocking_subthreads);
    CHECK(back.rates.call_price("search") == 0.002);
    CHECK(config_json(back) == config_json(c));
}

TEST_CASE("shipped scenarios load") {
    const auto names = list_scenarios();
    CHECK(names == std::vector<std::string>{"async_vs_blocking", "compression_stress", "concurrency_fanout", "demo",
                                            "kill_earlystop"});
    for (const auto& n : names) {
        const auto s = load_named_scenario(n);
        CHECK(s.name == n);
        CHECK_FALSE(s.task.empty());
        CHECK_FALSE(s.policy.rules().empty());
    }
    CHECK_THROWS(load_named_scenario("no_such_scenario"));
}
