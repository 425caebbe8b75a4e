#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <iterator>
#include <random>

#include "agentloop/metrics.hpp"
#include "support.hpp"

using namespace agentloop;
using testing::answer;
using testing::call;
using testing::rule;
using testing::rule_if;

namespace {

InfoUnitSet units(int n, const std::string& prefix = "fact ") {
    InfoUnitSet s;
    for (int i = 0; i < n; ++i) s.insert(prefix + std::to_string(i));
    return s;
}

double brute_force_loss(const std::set<std::string>& before, const std::set<std::string>& matched) {
    std::vector<std::string> both;
    std::set_intersection(before.begin(), before.end(), matched.begin(), matched.end(), std::back_inserter(both));
    return 1.0 - static_cast<double>(both.size()) / static_cast<double>(before.size());
}

TrajectoryStep step(std::string owner, int turn, double start, double end, std::size_t prompt) {
    TrajectoryStep s;
    s.owner = std::move(owner);
    s.turn = turn;
    s.sim_time_start = start;
    s.sim_time_end = end;
    s.prompt_tokens = prompt;
    return s;
}

}  // namespace

TEST_CASE("info loss examples") {
    const auto eight = units(8);
    CHECK(info_loss(eight, eight) == 0.0);
    CHECK(info_loss(eight, {}) == 1.0);
    CHECK(info_loss(eight, units(6)) == 0.25);
    CHECK_FALSE(info_loss({}, {}));
    // units outside `before` never count as retained
    CHECK(info_loss(units(4), units(4, "other ")) == 1.0);
}

TEST_CASE("property: info loss equals the brute-force intersection ratio") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 1000; ++i) {
        const int n = 1 + static_cast<int>(rng() % 40);
        InfoUnitSet before, matched;
        std::set<std::string> b, m;
        for (int k = 0; k < n; ++k) {
            const std::string u = "unit " + std::to_string(rng() % 100);
            before.insert(u);
            b.insert(u);
            if (rng() % 2) {
                matched.insert(u);
                m.insert(u);
            }
        }
        const double got = *info_loss(before, matched);
        const double want = brute_force_loss(b, m);
        CHECK(std::memcmp(&got, &want, sizeof got) == 0);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("unit sets trim, dedupe and reject blanks") {
    InfoUnitSet s;
    CHECK(s.insert("  a fact "));
    CHECK_FALSE(s.insert("a fact"));
    CHECK_FALSE(s.insert("   "));
    CHECK(s.contains("a fact"));
    CHECK(s.size() == 1);
}

TEST_CASE("unit line parsing") {
    CHECK(parse_unit_lines("one\ntwo\n\nthree").size() == 3);
    CHECK(parse_unit_lines("[None]").empty());
    CHECK(parse_unit_lines("  [None]\n").empty());
    CHECK(parse_unit_lines("dup\ndup\n").size() == 1);
    const auto marked = parse_unit_lines("- a\n* b\n3. c\n10) d");
    CHECK(marked == InfoUnitSet{"a", "b", "c", "d"});
}

TEST_CASE("judge-driven extraction and matching") {
    ScriptedPolicy three({rule("judge", "x is 1\ny is 2\nz is 3")});
    CHECK(extract_units("ctx", "task", three)->size() == 3);
    ScriptedPolicy none({rule("judge", "[None]")});
    CHECK(extract_units("ctx", "task", none)->empty());
    ScriptedPolicy dup({rule("judge", "x is 1\nx is 1\ny is 2")});
    CHECK(extract_units("ctx", "task", dup)->size() == 2);
    testing::DeadBackend dead;
    CHECK_FALSE(extract_units("ctx", "task", dead));

    const InfoUnitSet a{"x is 1", "y is 2"};
    ScriptedPolicy echo({rule("judge", "x is 1\ny is 2")});
    CHECK(*match_units(a, a, echo) == a);
    CHECK(match_units(a, {}, none)->empty());
    ScriptedPolicy liar({rule("judge", "x is 1\nthe moon is cheese")});
    const auto m = match_units(a, {"x is 1"}, liar);
    CHECK(*m == InfoUnitSet{"x is 1"});
    CHECK_FALSE(match_units(a, a, dead));
}

TEST_CASE("change count adds compressions and injected results") {
    std::vector<TrajectoryStep> steps;
    for (int t = 1; t <= 6; ++t) steps.push_back(step("main", t, t, t + 0.5, 100 * static_cast<std::size_t>(t)));
    steps[1].events.push_back({EventKind::Compress, "", "summary", 900, 100, "", ""});
    steps[3].events.push_back({EventKind::Compress, "", "fallback", 900, 200, "", ""});
    for (int i = 0; i < 5; ++i) steps[2 + i % 3].events.push_back({EventKind::Inject, "T" + std::to_string(i), "", 0, 0, "successful", "r"});
    steps[0].events.push_back({EventKind::Spawn, "T0", "", 0, 0, "", ""});
    steps[4].events.push_back({EventKind::Kill, "T1", "requested", 0, 0, "", ""});
    const auto st = run_context_stats(steps);
    CHECK(st.change_count == 7);
    CHECK(st.turns == 6);
    CHECK(st.peak_len == 600);
    CHECK(st.final_len == 600);
}

TEST_CASE("single-turn and empty statistics") {
    const auto single = context_stats({{step("main", 1, 0, 1, 321)}});
    CHECK(single.avg_peak_len == 321);
    CHECK(single.avg_final_len == 321);
    CHECK(single.turns == 1);
    CHECK(single.warnings.empty());

    const auto empty = context_stats({});
    CHECK(empty.change_count == 0);
    CHECK(empty.avg_peak_len == 0);
    CHECK(empty.turns == 0);
    CHECK(empty.warnings.size() == 1);

    const auto two = context_stats({{step("main", 1, 0, 1, 100)}, {step("main", 1, 0, 1, 300), step("main", 2, 1, 2, 200)}});
    CHECK(two.avg_peak_len == 200);
    CHECK(two.avg_final_len == 150);
    CHECK(two.turns == 1.5);
}

TEST_CASE("series slots reuse the lowest free column") {
    std::vector<TrajectoryStep> steps{step("main", 1, 0, 1, 50), step("A", 1, 1, 2, 10), step("B", 1, 1, 2, 20),
                                      step("main", 2, 1.5, 3, 60), step("A", 2, 2, 3, 11), step("C", 1, 4, 5, 30),
                                      step("main", 3, 4.5, 6, 70)};
    const auto st = run_context_stats(steps);
    CHECK(series_csv(st.series) == "turn,thread_slot,tokens\n1,Main,50\n2,Main,60\n2,C1,10\n2,C2,20\n3,Main,70\n3,C1,30\n");
}

TEST_CASE("retention over a scripted run") {
    testing::Harness h;
    h.config.rates.tokens_per_second = 1e12;
    const std::string visit = call("visit", {{"url", {"https://example.org/a"}}, {"goal", "g"}});
    h.policy = ScriptedPolicy({rule("main", call("branch", {testing::seed("S")}), 1),
                               rule("main", call("sleep", {{"sleep_duration", 10}}), 2), rule("main", answer("42"), 3),
                               rule("S", visit, 1), rule("S", answer("The number is 42."), 2)});
    const auto r = h.run();
    const auto steps = r.records();

    const auto changes = context_changes(steps, count_tokens);
    REQUIRE(changes.size() == 1);
    CHECK(changes[0].event.kind == ContextChangeKind::SubthreadReturn);
    CHECK(changes[0].event.thread == "S");
    CHECK(changes[0].after_text == "The number is 42.");
    CHECK(changes[0].before_text.find("Page A says 42.") != std::string::npos);
    CHECK(changes[0].event.before_tokens > changes[0].event.after_tokens);

    ScriptedPolicy judge({rule_if("judge", "Information Point List A", "Page A says 42.\nPage A was written in 1999."),
                          rule_if("judge", "Page A says 42.", "Page A says 42.\nPage A has a title."),
                          rule("judge", "Page A says 42.")});
    const auto ev = measure_retention(steps, "task", judge, count_tokens);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].before_units == 2);
    CHECK(ev[0].matched_units == 1);
    CHECK(ev[0].loss == 0.5);

    testing::DeadBackend dead;
    const auto skipped = measure_retention(steps, "task", dead, count_tokens);
    REQUIRE(skipped.size() == 1);
    CHECK_FALSE(skipped[0].loss);
    CHECK(skipped[0].note.find("skipped") != std::string::npos);

    ScriptedPolicy empty({rule("judge", "[None]")});
    const auto none = measure_retention(steps, "task", empty, count_tokens);
    CHECK_FALSE(none[0].loss);
}
