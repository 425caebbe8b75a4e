#include "agentloop/tools.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace agentloop {

using nlohmann::json;

namespace {

std::vector<ToolSpec> make_catalog() {
    std::vector<ToolSpec> specs;
    specs.push_back(ToolSpec{
        "search",
        "Perform Google web searches then returns a string of the top search results. Accepts multiple queries.",
        {{"query", "array<string>", true}},
        true,
        R"({"type": "function", "function": {"name": "search", "description": "Perform Google web searches then returns a string of the top search results. Accepts multiple queries.", "parameters": {"type": "object", "properties": {"query": {"type": "array", "items": {"type": "string", "description": "The search query."}, "minItems": 1, "description": "The list of search queries."}}, "required": ["query"]}}})"});
    specs.push_back(ToolSpec{
        "visit",
        "Visit webpage(s) and return the summary of the content.",
        {{"url", "array<string>", true}, {"goal", "string", true}},
        true,
        R"({"type": "function", "function": {"name": "visit", "description": "Visit webpage(s) and return the summary of the content.", "parameters": {"type": "object", "properties": {"url": {"type": "array", "items": {"type": "string"}, "description": "The URL(s) of the webpage(s) to visit. Can be a single URL or an array of URLs."}, "goal": {"type": "string", "description": "The specific information goal for visiting webpage(s)."}}, "required": ["url", "goal"]}}})"});
    specs.push_back(ToolSpec{
        "branch",
        "Create a subthread to perform a specific task.",
        {{"id", "string", true},
         {"target", "string", true},
         {"allowed_tools", "array<string>", true},
         {"assigned_context", "string", true},
         {"extra_info", "string", false}},
        false,
        R"({"type": "function", "function": {"name": "branch", "description": "Create a subthread to perform a specific task.", "parameters": {"type": "object", "properties": {"id": {"type": "string", "description": "The ID of the subthread. You can generate it freely according to your own habits."}, "target": {"type": "string", "description": "The target of the subthread. It must be specific and useful to the user's task."}, "allowed_tools": {"type": "array", "items": {"type": "string", "description": "The name of an allowed tool for the subthread."}, "minItems": 1, "description": "The list of allowed tools for the subthread."}, "assigned_context": {"type": "string", "description": "The history context assigned by main thread for the subthread."}, "extra_info": {"type": "string", "description": "Any extra information that the main thread wants to provide to the child thread."}}, "required": ["id", "target", "allowed_tools", "assigned_context"]}}})"});
    specs.push_back(ToolSpec{
        "sleep",
        "Sleep for a specified duration when you think the only thing to do is wait for the subthread to complete its task.",
        {{"sleep_duration", "number", true}},
        false,
        R"({"type": "function", "function": {"name": "sleep", "description": "Sleep for a specified duration when you think the only thing to do is wait for the subthread to complete its task.", "parameters": {"type": "object", "properties": {"sleep_duration": {"type": "number", "description": "The duration in seconds to sleep. Maximum 60 seconds"}}, "required": ["sleep_duration"]}}})"});
    specs.push_back(ToolSpec{
        "kill",
        "Kill a running subthread from the TCB list when you think it is no longer needed.",
        {{"id", "string", true}},
        false,
        R"({"type": "function", "function": {"name": "kill", "description": "Kill a running subthread from the TCB list when you think it is no longer needed.", "parameters": {"type": "object", "properties": {"id": {"type": "string", "description": "The ID of the subthread to kill."}}, "required": ["id"]}}})"});
    specs.push_back(ToolSpec{
        "delete",
        "Delete the information of a finished subthread from the TCB list when you think it is no longer needed.",
        {{"id", "string", true}},
        false,
        R"({"type": "function", "function": {"name": "delete", "description": "Delete the information of a finished subthread from the TCB list when you think it is no longer needed.", "parameters": {"type": "object", "properties": {"id": {"type": "string", "description": "The ID of the subthread to delete."}}, "required": ["id"]}}})"});
    return specs;
}

std::string visit_section(const std::string& url, const std::string& goal, const std::string& digest) {
    return "The useful information in " + url + " for user goal \"" + goal + "\" as follows:\n" + digest;
}

constexpr std::string_view kSectionSeparator = "\n=======\n";

std::string get_env(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string{};
}

bool retryable(const std::optional<HttpResponse>& r) {
    return !r || r->status == 429 || r->status >= 500;
}

}  // namespace

const std::vector<ToolSpec>& tool_catalog() {
    static const std::vector<ToolSpec> catalog = make_catalog();
    return catalog;
}

const ToolSpec* find_tool(std::string_view name) {
    for (const auto& spec : tool_catalog()) {
        if (spec.name == name) return &spec;
    }
    return nullptr;
}

const std::set<std::string>& catalog_names() {
    static const std::set<std::string> names = [] {
        std::set<std::string> s;
        for (const auto& spec : tool_catalog()) s.insert(spec.name);
        return s;
    }();
    return names;
}

const std::set<std::string>& subthread_eligible_tools() {
    static const std::set<std::string> names = [] {
        std::set<std::string> s;
        for (const auto& spec : tool_catalog()) {
            if (spec.subthread_eligible) s.insert(spec.name);
        }
        return s;
    }();
    return names;
}

std::string render_search_hits(const std::string& query, const std::vector<SearchHit>& hits) {
    if (hits.empty()) return "No results found for '" + query + "'.";
    std::ostringstream out;
    out << "A search for '" << query << "' found " << hits.size() << " results:\n";
    for (std::size_t i = 0; i < hits.size(); ++i) {
        out << "\n" << (i + 1) << ". [" << hits[i].title << "](" << hits[i].url << ")\n" << hits[i].snippet << "\n";
    }
    std::string text = out.str();
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

FixtureBackend FixtureBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open fixture corpus: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

FixtureBackend FixtureBackend::from_json_text(std::string_view text) {
    const json doc = json::parse(text);
    FixtureBackend backend;
    if (auto it = doc.find("search"); it != doc.end()) {
        for (const auto& [query, value] : it->items()) {
            if (value.is_string()) {
                backend.add_search(query, value.get<std::string>());
                continue;
            }
            std::vector<SearchHit> hits;
            for (const auto& h : value) {
                hits.push_back(SearchHit{h.value("title", ""), h.value("url", ""), h.value("snippet", "")});
            }
            backend.add_search(query, render_search_hits(query, hits));
        }
    }
    if (auto it = doc.find("visit"); it != doc.end()) {
        for (const auto& [url, digest] : it->items()) backend.add_page(url, digest.get<std::string>());
    }
    if (auto it = doc.find("unreachable"); it != doc.end()) {
        for (const auto& url : *it) backend.add_unreachable(url.get<std::string>());
    }
    return backend;
}

std::optional<std::string> FixtureBackend::search_one(const std::string& query) const {
    if (auto it = search_.find(query); it != search_.end()) return it->second;
    return render_search_hits(query, {});
}

std::optional<std::string> FixtureBackend::visit_one(const std::string& url, const std::string&) const {
    if (unreachable_.contains(url)) return std::nullopt;
    auto it = pages_.find(url);
    if (it == pages_.end()) return std::nullopt;
    return it->second;
}

LiveToolConfig live_tool_config_from_env() {
    LiveToolConfig config;
    config.search_api_key = get_env("SEARCH_API_KEY");
    if (auto v = get_env("SEARCH_ENDPOINT"); !v.empty()) config.search_endpoint = v;
    if (auto v = get_env("READER_ENDPOINT"); !v.empty()) config.reader_endpoint = v;
    return config;
}

LiveBackend::LiveBackend(LiveToolConfig config, HttpTransport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

std::optional<std::string> LiveBackend::search_one(const std::string& query) const {
    HttpRequest req;
    req.method = "POST";
    req.url = config_.search_endpoint;
    req.headers = {{"X-API-KEY", config_.search_api_key}, {"Content-Type", "application/json"}};
    req.body = json{{"q", query}, {"num", config_.top_k}}.dump();

    std::optional<HttpResponse> resp;
    for (int attempt = 0; attempt < config_.attempts; ++attempt) {
        resp = transport_(req);
        if (!retryable(resp)) break;
    }
    if (!resp || resp->status != 200) return std::nullopt;

    const json doc = json::parse(resp->body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    std::vector<SearchHit> hits;
    if (auto it = doc.find("organic"); it != doc.end() && it->is_array()) {
        for (const auto& item : *it) {
            if (static_cast<int>(hits.size()) >= config_.top_k) break;
            if (!item.is_object()) continue;
            hits.push_back(SearchHit{item.value("title", ""), item.value("link", ""), item.value("snippet", "")});
        }
    }
    return render_search_hits(query, hits);
}

std::optional<std::string> LiveBackend::visit_one(const std::string& url, const std::string&) const {
    HttpRequest req;
    req.method = "GET";
    req.url = config_.reader_endpoint + url;
    std::optional<HttpResponse> resp;
    for (int attempt = 0; attempt < config_.attempts; ++attempt) {
        resp = transport_(req);
        if (!retryable(resp)) break;
    }
    if (!resp || resp->status != 200 || resp->body.empty()) return std::nullopt;
    std::string text = resp->body;
    if (text.size() > config_.max_page_chars) {
        std::size_t cut = config_.max_page_chars;
        // back off to a UTF-8 boundary
        while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
        text.resize(cut);
    }
    return text;
}

ToolResult search(const std::vector<std::string>& queries, const ToolBackend& backend) {
    ToolResult result;
    result.call_count_by_tool["search"] = 1;
    bool any_ok = false;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (i > 0) result.text += kSectionSeparator;
        if (auto listing = backend.search_one(queries[i])) {
            result.text += *listing;
            any_ok = true;
        } else {
            result.text += "[search failed: " + queries[i] + "]";
        }
    }
    result.ok = any_ok;
    if (result.text.empty()) result.text = "[search failed: no queries]";
    return result;
}

ToolResult visit(const std::vector<std::string>& urls, const std::string& goal, const ToolBackend& backend) {
    ToolResult result;
    result.call_count_by_tool["visit"] = 1;
    bool any_ok = false;
    for (std::size_t i = 0; i < urls.size(); ++i) {
        if (i > 0) result.text += kSectionSeparator;
        if (auto digest = backend.visit_one(urls[i], goal)) {
            result.text += visit_section(urls[i], goal, *digest);
            any_ok = true;
        } else {
            result.text += "[visit failed: " + urls[i] + "]";
        }
    }
    result.ok = any_ok;
    if (result.text.empty()) result.text = "[visit failed: no urls]";
    return result;
}

std::string permission_denied_text(std::string_view tool) {
    return "Error: tool not permitted for this thread: " + std::string(tool);
}

ToolResult dispatch(const ToolCall& call, const std::set<std::string>& allowed, const ToolBackend& backend) {
    const std::string name(call.name());
    if (!allowed.contains(name)) return ToolResult{permission_denied_text(name), false, {}};
    if (const auto* s = std::get_if<SearchCall>(&call.call)) return search(s->queries, backend);
    const auto& v = std::get<VisitCall>(call.call);
    return visit(v.urls, v.goal, backend);
}

}  // namespace agentloop
