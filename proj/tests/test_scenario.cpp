#include <doctest.h>

#include <algorithm>

#include "agentloop/scenario.hpp"

using namespace agentloop;

TEST_CASE("every shipped scenario passes its checks") {
    for (const auto& name : list_scenarios()) {
        CAPTURE(name);
        const auto report = run_scenario(load_named_scenario(name));
        for (const auto& c : report.checks) {
            CAPTURE(c.name);
            CAPTURE(c.detail);
            CHECK(c.pass);
        }
        CHECK(report.passed());
        CHECK(render_scenario_report(report).find("result: PASS") != std::string::npos);
    }
}

TEST_CASE("scenario checks catch violations") {
    auto s = load_named_scenario("kill_earlystop");
    auto run = run_scenario_once(s, false);
    CHECK(check_kill_semantics(run.result, "slow").pass);
    // a result posted by a killed thread must be flagged
    run.result.posted.push_back({"slow", ThreadState::Successful, "leaked", 1.0});
    CHECK_FALSE(check_kill_semantics(run.result, "slow").pass);
    CHECK_FALSE(check_kill_semantics(run.result, "no_such_thread").pass);

    auto demo = run_scenario_once(load_named_scenario("demo"), false);
    REQUIRE(demo.result.windows.size() > 1);
    demo.result.windows[1].push(Role::Environment, "stray");
    CHECK(check_isolation(demo.result).pass);
    // leak the main thread's branch call into a subthread history
    const auto& main_msgs = demo.result.windows[0].messages();
    const auto leaked = std::find_if(main_msgs.begin(), main_msgs.end(), [](const Message& m) {
        return m.role == Role::Assistant && m.content.find("branch") != std::string::npos;
    });
    REQUIRE(leaked != main_msgs.end());
    demo.result.windows[1].push(Role::Environment, leaked->content);
    CHECK_FALSE(check_isolation(demo.result).pass);
}
