#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "agentloop/trajectory_io.hpp"
#include "support.hpp"

using namespace agentloop;
using testing::answer;
using testing::call;
using testing::rule;
using testing::rule_min;

namespace {

RunResult sample_run(std::size_t budget = 128000) {
    testing::Harness h;
    h.config.context_budget = budget;
    const std::string search = call("search", {{"query", {"q"}}});
    h.policy = ScriptedPolicy({rule("main", call("branch", {testing::seed("A"), testing::seed("B")}), 1),
                               rule("main", call("sleep", {{"sleep_duration", 4}}), 2),
                               rule("main", call("kill", {{"id", "B"}}), 3), rule_min("main", 14, answer("done")),
                               rule("main", "Thinking " + std::string(900, 't') + "\n" + search), rule("A", search, 1),
                               rule("A", answer("RA"), 2), rule("B", search)});
    return h.run();
}

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> alpha = {"a", "Z", " ", "\n", "\t", "\"", "\\", "{", "}", "é", " ", "<", ">"};
    std::string s;
    for (std::size_t i = 0, n = rng() % 30; i < n; ++i) s += alpha[rng() % alpha.size()];
    return s;
}

}  // namespace

TEST_CASE("record field order is fixed") {
    TrajectoryStep s;
    s.owner = "main";
    s.turn = 1;
    s.act_kind = "finish";
    s.prompt_digest = "d";
    const std::string line = to_json_line(s);
    CHECK(line.starts_with(R"({"owner":"main","turn":1,"raw_output":"","act_kind":"finish","act_args_digest":"","observation":"")"));
    CHECK(line.find("\"tool\"") == std::string::npos);
    CHECK(line.find("\"forced\"") == std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("property: records survive a round trip") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 300; ++i) {
        TrajectoryStep s;
        s.owner = rng() % 2 ? "main" : "T" + std::to_string(rng() % 9);
        s.turn = static_cast<int>(rng() % 40);
        s.raw_output = random_text(rng);
        s.act_kind = "search";
        s.act_args_digest = digest_hex(s.raw_output);
        s.observation = random_text(rng);
        s.prompt_tokens = rng() % 100000;
        s.generated_tokens = rng() % 5000;
        s.sim_time_start = static_cast<double>(rng() % 100000) / 7.0;
        s.sim_time_end = s.sim_time_start + static_cast<double>(rng() % 1000) / 3.0;
        if (rng() % 2) s.tool = "visit";
        if (rng() % 3 == 0) s.sleep_seconds = 0.25 * static_cast<double>(1 + rng() % 240);
        s.prompt_digest = digest_hex(s.observation);
        if (rng() % 2) s.tcb_span = TcbSpan{rng() % 50, rng() % 50};
        s.forced = rng() % 5 == 0;
        if (rng() % 2) s.system_prompt = random_text(rng);
        if (rng() % 3 == 0) s.history = std::vector<HistoryMessage>{{Role::Assistant, random_text(rng), std::nullopt},
                                                                    {Role::Environment, random_text(rng), TcbSpan{1, 2}}};
        if (rng() % 4 == 0) s.state = "failed";
        if (rng() % 2) s.events.push_back({EventKind::Inject, "T1", "", 0, 0, "successful", random_text(rng)});
        if (rng() % 2) s.events.push_back({EventKind::Compress, "", "summary", rng() % 9999, rng() % 999, "", ""});
        if (rng() % 2) s.events.push_back({EventKind::Kill, "T2", "shutdown", 0, 0, "", ""});
        const std::string line = to_json_line(s);
        auto back = from_json_line(line);
        REQUIRE(std::holds_alternative<TrajectoryStep>(back));
        CHECK(std::get<TrajectoryStep>(back) == s);
        CHECK(to_json_line(std::get<TrajectoryStep>(back)) == line);
    }
}

TEST_CASE("a run re-serializes byte-identically through a file") {
    const auto run = sample_run();
    const auto steps = run.records();
    const auto dir = std::filesystem::temp_directory_path() / "agentloop_io_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "trajectory.jsonl";
    write_trajectory(path, steps);
    const auto loaded = read_trajectory(path);
    CHECK_FALSE(loaded.error_line);
    CHECK(loaded.steps == steps);
    std::ifstream in(path, std::ios::binary);
    const std::string original((std::istreambuf_iterator<char>(in)), {});
    CHECK(serialize_trajectory(loaded.steps) == original);
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt line stops loading and reports its index") {
    const auto steps = sample_run().records();
    REQUIRE(steps.size() > 4);
    std::string text = serialize_trajectory(steps);
    // cut the fourth line in half
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) pos = text.find('\n', pos) + 1;
    const std::size_t end = text.find('\n', pos);
    text = text.substr(0, pos + (end - pos) / 2) + "\n" + text.substr(end + 1);
    const auto loaded = parse_trajectory(text);
    CHECK(loaded.error_line == 4);
    CHECK(loaded.steps.size() == 3);
    CHECK_FALSE(loaded.error.empty());

    const auto junk = parse_trajectory("\n[1,2]\n");
    CHECK(junk.error_line == 2);
    const auto missing = parse_trajectory("{\"owner\":\"main\"}\n");
    CHECK(missing.error_line == 1);
    const auto blank = parse_trajectory("\n\n");
    CHECK_FALSE(blank.error_line);
    CHECK(blank.steps.empty());
}

TEST_CASE("replay rebuilds every prompt digest") {
    for (std::size_t budget : {128000u, 4000u}) {
        CAPTURE(budget);
        const auto run = sample_run(budget);
        const auto steps = run.records();
        const auto rec = reconstruct(steps, count_tokens);
        CHECK(rec.mismatches.empty());
        CHECK(rec.prompts_checked == steps.size());
        // the final main window matches the live one
        std::vector<Message> live = run.windows[0].messages();
        const auto& rebuilt = rec.windows.at("main");
        REQUIRE(rebuilt.size() == live.size());
        for (std::size_t i = 0; i < live.size(); ++i) CHECK(rebuilt[i].content == live[i].content);
        if (budget == 4000u) CHECK_FALSE(rec.compressions.empty());
    }
}

TEST_CASE("tampering is detected") {
    auto steps = sample_run().records();
    for (auto& s : steps) {
        if (s.owner == "main" && s.turn == 2) s.raw_output += " ";
    }
    const auto rec = reconstruct(steps, count_tokens);
    REQUIRE_FALSE(rec.mismatches.empty());
    CHECK(rec.mismatches[0].owner == "main");
    CHECK(rec.mismatches[0].turn == 3);
}

TEST_CASE("transcript shows events inline") {
    const auto text = render_transcript(sample_run().records());
    CHECK(text.find("* spawn A") != std::string::npos);
    CHECK(text.find("* kill B (requested)") != std::string::npos);
    CHECK(text.find("* inject A [successful]") != std::string::npos);
    CHECK(text.find("main turn 1 :: branch") != std::string::npos);
}
