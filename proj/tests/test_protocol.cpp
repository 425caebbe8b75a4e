#include <doctest.h>

#include <random>

#include "agentloop/llm_client.hpp"
#include "agentloop/protocol.hpp"
#include "agentloop/tools.hpp"
#include "support.hpp"

using namespace agentloop;
using testing::call;

namespace {

ParsedAction ok(const ParseOutcome& o) {
    REQUIRE_MESSAGE(std::holds_alternative<ParsedAction>(o),
                    (std::holds_alternative<ParseError>(o) ? std::get<ParseError>(o).message() : ""));
    return std::get<ParsedAction>(o);
}

ParseErrorKind err(const ParseOutcome& o) {
    REQUIRE(std::holds_alternative<ParseError>(o));
    return std::get<ParseError>(o).kind;
}

std::string word(std::mt19937_64& rng, std::size_t min_len = 1) {
    static const std::vector<std::string> alpha = {"a", "b", "k", "q", "z", "0", "7", " ", ".", ",", "-", "_", "?", "\"",
                                                   "'", "/", "\\", "{", "}", "[", "]", ":", "é", "日"};
    const std::size_t n = min_len + rng() % 20;
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += alpha[rng() % alpha.size()];
    // keep strings trimmed and non-blank
    if (s.front() == ' ') s.front() = 'x';
    if (s.back() == ' ') s.back() = 'y';
    return s;
}

std::string ident(std::mt19937_64& rng) {
    static const std::string alpha = "abcdefghijklmnopqrstuvwxyz0123456789-_";
    std::string s = "t";
    const std::size_t n = rng() % 10;
    for (std::size_t i = 0; i < n; ++i) s += alpha[rng() % alpha.size()];
    return s;
}

Action random_action(std::mt19937_64& rng) {
    Action a;
    if (rng() % 2) a.think = word(rng);
    switch (rng() % 7) {
        case 0: {
            SearchCall s;
            for (std::size_t i = 0, n = 1 + rng() % 3; i < n; ++i) s.queries.push_back(word(rng));
            a.act = ToolCall{s};
            break;
        }
        case 1: {
            VisitCall v;
            for (std::size_t i = 0, n = 1 + rng() % 3; i < n; ++i) v.urls.push_back("https://e.org/" + ident(rng));
            v.goal = word(rng);
            a.act = ToolCall{v};
            break;
        }
        case 2: {
            Branch b;
            for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) {
                TcbSeed s{ident(rng), word(rng), {"search"}, rng() % 2 ? word(rng) : "", std::nullopt};
                if (rng() % 2) s.allowed_tools.push_back("visit");
                if (rng() % 2) s.extra_info = word(rng);
                b.seeds.push_back(s);
            }
            a.act = b;
            break;
        }
        case 3: a.act = Kill{ident(rng)}; break;
        case 4: a.act = Delete{ident(rng)}; break;
        case 5: a.act = Sleep{static_cast<double>(1 + rng() % 600) / 10.0}; break;
        default: a.act = Finish{word(rng)}; break;
    }
    return a;
}

}  // namespace

TEST_CASE("answer tag yields finish with trimmed text") {
    const auto& p = ok(parse_action("<answer> 42 </answer>", catalog_names()));
    CHECK(std::get<Finish>(p.action.act).answer == "42");
    CHECK_FALSE(p.action.think);
}

TEST_CASE("answer outranks tool call") {
    const std::string raw = "thinking\n" + call("search", {{"query", {"x"}}}) + "\n<answer>done</answer>";
    const auto& p = ok(parse_action(raw, catalog_names()));
    CHECK(std::get<Finish>(p.action.act).answer == "done");
}

TEST_CASE("search call with think prefix") {
    const auto& p = ok(parse_action("I should look.\n" + call("search", {{"query", {"a", "b"}}}), catalog_names()));
    CHECK(p.action.think == "I should look.");
    CHECK(std::get<SearchCall>(std::get<ToolCall>(p.action.act).call).queries == std::vector<std::string>{"a", "b"});
}

TEST_CASE("scalar query and url are accepted") {
    const auto& p = ok(parse_action(call("visit", {{"url", "https://x"}, {"goal", "g"}}), catalog_names()));
    CHECK(std::get<VisitCall>(std::get<ToolCall>(p.action.act).call).urls.size() == 1);
}

TEST_CASE("double encoded arguments") {
    const std::string raw = R"(<tool_call>{"name": "kill", "arguments": "{\"id\": \"T1\"}"}</tool_call>)";
    CHECK(std::get<Kill>(ok(parse_action(raw, catalog_names())).action.act).id == "T1");
}

TEST_CASE("multiple tool calls honor the first and warn") {
    const std::string raw = call("kill", {{"id", "A"}}) + call("kill", {{"id", "B"}});
    const auto& p = ok(parse_action(raw, catalog_names()));
    CHECK(std::get<Kill>(p.action.act).id == "A");
    CHECK(p.warnings.size() == 1);
}

TEST_CASE("parse errors") {
    const auto& cat = catalog_names();
    CHECK(err(parse_action("I think the answer is 4.", cat)) == ParseErrorKind::NoActFound);
    CHECK(err(parse_action("<tool_call>{\"name\": ", cat)) == ParseErrorKind::MalformedCall);
    CHECK(err(parse_action("<tool_call>{name: search}</tool_call>", cat)) == ParseErrorKind::MalformedCall);
    CHECK(err(parse_action(call("shell", {{"cmd", "ls"}}), cat)) == ParseErrorKind::UnknownName);
    CHECK(err(parse_action(call("search", {{"q", {"x"}}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("search", {{"query", nlohmann::json::array()}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("search", {{"query", {""}}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("visit", {{"url", {"u"}}, {"goal", " "}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("sleep", {{"sleep_duration", 0}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("sleep", {{"sleep_duration", 61}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("sleep", {{"sleep_duration", "5"}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("branch", {{"id", "x"}}), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("branch", nlohmann::json::array()), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action(call("kill", nlohmann::json::object()), cat)) == ParseErrorKind::ArgSchemaViolation);
    CHECK(err(parse_action("<answer>unterminated", cat)) == ParseErrorKind::NoActFound);
}

TEST_CASE("sleep boundaries") {
    CHECK(std::get<Sleep>(ok(parse_action(call("sleep", {{"sleep_duration", 60}}), catalog_names())).action.act).seconds == 60);
    CHECK(std::get<Sleep>(ok(parse_action(call("sleep", {{"sleep_duration", 0.5}}), catalog_names())).action.act).seconds == 0.5);
}

TEST_CASE("property: render then parse is the identity") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 2000; ++i) {
        const Action a = random_action(rng);
        const std::string raw = render_completion(a);
        const auto out = parse_action(raw, catalog_names());
        REQUIRE_MESSAGE(std::holds_alternative<ParsedAction>(out), raw);
        CHECK_MESSAGE(std::get<ParsedAction>(out).action == a, raw);
    }
}

TEST_CASE("property: parser is total over arbitrary bytes") {
    std::mt19937_64 rng(99);
    const std::vector<std::string> pieces = {"<tool_call>", "</tool_call>", "<answer>", "</answer>", "{", "}", "\"name\"",
                                             ":", "\"search\"", "\"arguments\"", "[", "]", "\"query\"", ",", "\\", "\x01",
                                             "\xff", "null", "1e999", "\"branch\""};
    for (int i = 0; i < 5000; ++i) {
        std::string raw;
        for (std::size_t k = 0, n = rng() % 12; k < n; ++k) raw += pieces[rng() % pieces.size()];
        const auto out = parse_action(raw, catalog_names());
        if (const auto* e = std::get_if<ParseError>(&out)) CHECK_FALSE(e->message().empty());
    }
}

TEST_CASE("digest is FNV-1a 64") {
    CHECK(digest_hex("") == "cbf29ce484222325");
    CHECK(digest_hex("a") == "af63dc4c8601ec8c");
    CHECK(digest_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("tcb rendering") {
    Tcb t{*ThreadId::make("T1"), "Find X"};
    t.allowed_tools = {"search", "visit"};
    t.start_time = 1.0;
    const std::string running = render_tcb(t, 3.25);
    CHECK(running ==
          "Thread ID: T1\nTarget: Find X\nStatus: Running\nAllowed Tools: search, visit\nAssigned Context: None\nRuntime: 2.2s");
    t.transition(ThreadState::Successful, 4.0, "R");
    CHECK(render_tcb(t, 9.0).ends_with("Runtime: 3.0s\nResult: R"));

    Tcb k{*ThreadId::make("T2"), "g"};
    k.prefix_context = std::string(300, 'c');
    k.transition(ThreadState::Killed, 1.0, std::nullopt);
    const std::string killed = render_tcb(k, 2.0);
    CHECK(killed.find("Status: Killed") != std::string::npos);
    CHECK(killed.find("Result:") == std::string::npos);
    CHECK(killed.find("Assigned Context: " + std::string(200, 'c') + "...\n") != std::string::npos);
}

TEST_CASE("observation rendering and stale block stripping") {
    Observation obs;
    obs.tool_feedback = "ok";
    obs.injected_results.push_back({"T1", ThreadState::Successful, "R1", 1.0});
    obs.injected_results.push_back({"T2", ThreadState::Failed, "boom", 2.0});
    obs.tcb_snapshot = {"Thread ID: T1", "Thread ID: T2"};
    const auto r = render_observation(obs);
    CHECK(r.text ==
          "<tool_response>ok</tool_response>\nSubthread T1 finished: R1\nSubthread T2 failed: boom\nTCB List:\n\nThread "
          "ID: T1\n\nThread ID: T2");
    REQUIRE(r.tcb_span);
    CHECK(r.text.substr(r.tcb_span->offset, r.tcb_span->length).starts_with("TCB List:"));
    CHECK(r.text.substr(r.tcb_span->offset).size() == r.tcb_span->length);

    CHECK_FALSE(render_observation(Observation{"x", {}, {}}).tcb_span);

    ContextWindow w(Owner::main(), 100000, count_tokens);
    w.push(Role::System, "sys");
    for (int i = 0; i < 5; ++i) {
        w.push(Role::Assistant, "a");
        w.push(Role::Environment, r.text, r.tcb_span);
    }
    CHECK(count_live_tcb_blocks(w.messages()) == 5);
    w = strip_stale_tcb(std::move(w));
    CHECK(count_live_tcb_blocks(w.messages()) == 1);
    CHECK(w.messages().back().tcb_span);
    const std::string all = serialize_prompt(w.messages());
    std::size_t headers = 0;
    for (auto p = all.find("TCB List:"); p != std::string::npos; p = all.find("TCB List:", p + 1)) ++headers;
    CHECK(headers == 1);
    CHECK(w.messages()[2].content ==
          "<tool_response>ok</tool_response>\nSubthread T1 finished: R1\nSubthread T2 failed: boom\n[TCB list elided]");
}

TEST_CASE("prompt templates") {
    const std::string main = build_prompt(PromptTemplate::Main, {{"user_task", "TASK-XYZ"}});
    CHECK(main.find("TASK-XYZ") != std::string::npos);
    for (const auto& spec : tool_catalog()) CHECK(main.find(spec.definition) != std::string::npos);
    CHECK(main.find("{user_task}") == std::string::npos);

    const std::string sub = build_prompt(PromptTemplate::Sub, {{"goal", "G1"}, {"allowed_tools", "search"}, {"assigned_context", "C1"}});
    CHECK(sub.find("G1") != std::string::npos);
    CHECK(sub.find("C1") != std::string::npos);
    CHECK(sub.find(find_tool("search")->definition) != std::string::npos);
    CHECK(sub.find(find_tool("branch")->definition) == std::string::npos);

    // substituted text is not rescanned for slots
    const std::string again = build_prompt(PromptTemplate::Main, {{"user_task", "{user_task} {goal}"}});
    CHECK(again.find("{user_task} {goal}") != std::string::npos);

    CHECK_THROWS_AS(build_prompt(PromptTemplate::Main, {}), MissingSlot);
    CHECK_THROWS_AS(build_prompt(PromptTemplate::Sub, {{"goal", "g"}}), MissingSlot);
    CHECK_THROWS_AS(build_prompt(PromptTemplate::Union, {{"info_list_a", "a"}}), MissingSlot);
    CHECK_NOTHROW(build_prompt(PromptTemplate::Extraction, {{"task_description", "t"}, {"context_info", "c"}}));
    CHECK_NOTHROW(build_prompt(PromptTemplate::Compression, {{"question", "q"}, {"recent_history_messages", "h"}}));
}

TEST_CASE("prompt serialization is deterministic") {
    ContextWindow w(Owner::main(), 100, count_tokens);
    w.push(Role::System, "s");
    w.push(Role::Assistant, "a");
    w.push(Role::Environment, "e");
    CHECK(serialize_prompt(w.messages()) == "<|system|>\ns\n<|assistant|>\na\n<|environment|>\ne\n");
}
