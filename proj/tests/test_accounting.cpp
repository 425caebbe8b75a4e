#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "agentloop/accounting.hpp"
#include "support.hpp"

using namespace agentloop;

namespace {

TrajectoryStep step(std::string owner, std::size_t prompt, std::size_t gen, std::optional<std::string> tool = {},
                    double sleep = 0.0) {
    TrajectoryStep s;
    s.owner = std::move(owner);
    s.prompt_tokens = prompt;
    s.generated_tokens = gen;
    s.tool = std::move(tool);
    s.sleep_seconds = sleep;
    return s;
}

Ledger random_ledger(std::mt19937_64& rng, const std::string& owner) {
    Ledger l;
    l.owner = owner;
    l.prompt_tokens = static_cast<double>(rng() % 1000000);
    l.generated_tokens = static_cast<double>(rng() % 100000);
    l.tool_calls["search"] = rng() % 50;
    l.tool_calls["visit"] = rng() % 50;
    l.sleep_seconds = static_cast<double>(rng() % 600) / 10.0;
    return l;
}

}  // namespace

TEST_CASE("total time examples") {
    const RateCard rates;
    Ledger one_second;
    one_second.prompt_tokens = 1385.65;
    CHECK(std::abs(total_time(one_second, rates) - 1.0) < 1e-9);
    CHECK(total_time(Ledger{}, rates) == 0.0);

    Ledger composite;
    composite.prompt_tokens = 2000.0;
    composite.generated_tokens = 771.30;
    composite.tool_calls = {{"search", 2}, {"visit", 1}};
    composite.sleep_seconds = 5.0;
    CHECK(std::abs(total_time(composite, rates) - 11.0) < 1e-9);
}

TEST_CASE("total cost examples") {
    const RateCard rates;
    Ledger prompt_only;
    prompt_only.prompt_tokens = 1e6;
    CHECK(std::abs(total_cost(std::vector<Ledger>{prompt_only}, rates) - 0.80) < 1e-12);
    Ledger searches;
    searches.tool_calls["search"] = 1000;
    CHECK(std::abs(total_cost(std::vector<Ledger>{searches}, rates) - 1.00) < 1e-12);
    CHECK(total_cost(std::vector<Ledger>{}, rates) == 0.0);
    Ledger visits;
    visits.tool_calls["visit"] = 40;
    CHECK(total_cost(std::vector<Ledger>{visits}, rates) == 0.0);
}

TEST_CASE("ledgers fold steps per owner in order of appearance") {
    const std::vector<TrajectoryStep> steps{step("main", 100, 10), step("T1", 50, 5, "search"),
                                            step("main", 200, 20, "visit"), step("T1", 60, 6, "search"),
                                            step("main", 300, 30, std::nullopt, 7.5)};
    const auto ledgers = ledgers_from_steps(steps);
    REQUIRE(ledgers.size() == 2);
    CHECK(ledgers[0].owner == "main");
    CHECK(ledgers[0].prompt_tokens == 600);
    CHECK(ledgers[0].generated_tokens == 60);
    CHECK(ledgers[0].tool_calls.at("visit") == 1);
    CHECK(ledgers[0].sleep_seconds == 7.5);
    CHECK(ledgers[1].tool_calls.at("search") == 2);

    const RateCard rates;
    const auto report = account(steps, rates);
    // only the main thread is charged for time
    CHECK(report.total_time == doctest::Approx(660 / rates.tokens_per_second + 2.0 + 7.5));
    CHECK(report.total_cost == doctest::Approx((600 + 60 + 110 + 11) / 1e6 * 0.80 + 2 * 0.001));
    const auto j = nlohmann::json::parse(accounting_json(report, rates));
    CHECK(j["threads"].size() == 2);
    CHECK(j["total_cost_usd"].get<double>() == report.total_cost);
    CHECK(render_report(report).find("Total time (main thread)") != std::string::npos);
}

TEST_CASE("property: cost is additive over ledgers and time is monotone") {
    std::mt19937_64 rng(12);
    const RateCard rates;
    for (int i = 0; i < 500; ++i) {
        std::vector<Ledger> ls;
        for (int k = 0, n = 1 + static_cast<int>(rng() % 5); k < n; ++k) ls.push_back(random_ledger(rng, "T" + std::to_string(k)));
        double parts = 0.0;
        for (const auto& l : ls) parts += total_cost(std::vector<Ledger>{l}, rates);
        CHECK(total_cost(ls, rates) == doctest::Approx(parts).epsilon(1e-12));

        Ledger more = ls[0];
        const double before = total_time(more, rates);
        switch (rng() % 4) {
            case 0: more.prompt_tokens += static_cast<double>(1 + rng() % 1000); break;
            case 1: more.generated_tokens += static_cast<double>(1 + rng() % 1000); break;
            case 2: ++more.tool_calls[rng() % 2 ? "search" : "visit"]; break;
            default: more.sleep_seconds += 0.5; break;
        }
        CHECK(total_time(more, rates) > before);
        CHECK(total_cost(std::vector<Ledger>{more}, rates) >= total_cost(std::vector<Ledger>{ls[0]}, rates));
    }
}

TEST_CASE("accounting over a simulated run matches the executor clock") {
    testing::Harness h;
    h.policy = ScriptedPolicy({testing::rule("main", testing::call("search", {{"query", {"q"}}}), 1),
                               testing::rule("main", testing::call("sleep", {{"sleep_duration", 3}}), 2),
                               testing::rule("main", testing::answer("x"), 3)});
    const auto r = h.run();
    const auto report = account(r.records(), h.config.rates);
    // with no subthreads the main thread's charged time is the makespan
    CHECK(report.total_time == doctest::Approx(r.makespan).epsilon(1e-9));
    CHECK(report.makespan == doctest::Approx(r.makespan));
}
