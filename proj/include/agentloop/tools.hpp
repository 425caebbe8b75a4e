#pragma once

// The environment: action catalog, web search and page visiting with live
// HTTP and fixture backends, and permission-checked dispatch.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agentloop/http.hpp"
#include "agentloop/model.hpp"

namespace agentloop {

struct ToolArgument {
    std::string name;
    std::string type;
    bool required = false;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ToolArgument> arguments;
    bool subthread_eligible = false;
    /// Function definition as presented to the model inside <tools>.
    std::string definition;
};

/// search, visit, branch, sleep, kill, delete, in that order.
const std::vector<ToolSpec>& tool_catalog();
const ToolSpec* find_tool(std::string_view name);
const std::set<std::string>& catalog_names();
/// search and visit.
const std::set<std::string>& subthread_eligible_tools();

struct ToolResult {
    std::string text;
    bool ok = true;
    std::map<std::string, int> call_count_by_tool;
};

struct SearchHit {
    std::string title;
    std::string url;
    std::string snippet;
};

/// Per-item primitives a backend provides; search/visit compose them.
class ToolBackend {
public:
    virtual ~ToolBackend() = default;

    /// Rendered listing for one query, or nullopt on backend failure.
    virtual std::optional<std::string> search_one(const std::string& query) const = 0;
    /// Digest of one page oriented to `goal`, or nullopt when unreachable.
    virtual std::optional<std::string> visit_one(const std::string& url, const std::string& goal) const = 0;
};

std::string render_search_hits(const std::string& query, const std::vector<SearchHit>& hits);

/// Immutable corpus loaded from a JSON file:
///   {"search": {query: [{"title","url","snippet"}...] | "verbatim text"},
///    "visit": {url: digest}, "unreachable": [url...]}
class FixtureBackend final : public ToolBackend {
public:
    FixtureBackend() = default;
    static FixtureBackend from_file(const std::filesystem::path& path);
    static FixtureBackend from_json_text(std::string_view text);

    std::optional<std::string> search_one(const std::string& query) const override;
    std::optional<std::string> visit_one(const std::string& url, const std::string& goal) const override;

    void add_search(std::string query, std::string rendered) { search_[std::move(query)] = std::move(rendered); }
    void add_page(std::string url, std::string digest) { pages_[std::move(url)] = std::move(digest); }
    void add_unreachable(std::string url) { unreachable_.insert(std::move(url)); }

private:
    std::map<std::string, std::string> search_;
    std::map<std::string, std::string> pages_;
    std::set<std::string> unreachable_;
};

struct LiveToolConfig {
    std::string search_endpoint = "https://google.serper.dev/search";
    std::string search_api_key;
    std::string reader_endpoint = "https://r.jina.ai/";
    int top_k = 5;
    /// Visit keeps at most this many characters of page text (4k tokens at
    /// the default 4 characters per token).
    std::size_t max_page_chars = 16000;
    int attempts = 3;
};

/// Reads SEARCH_API_KEY, SEARCH_ENDPOINT and READER_ENDPOINT.
LiveToolConfig live_tool_config_from_env();

class LiveBackend final : public ToolBackend {
public:
    LiveBackend(LiveToolConfig config, HttpTransport transport);

    std::optional<std::string> search_one(const std::string& query) const override;
    std::optional<std::string> visit_one(const std::string& url, const std::string& goal) const override;

private:
    LiveToolConfig config_;
    HttpTransport transport_;
};

ToolResult search(const std::vector<std::string>& queries, const ToolBackend& backend);
ToolResult visit(const std::vector<std::string>& urls, const std::string& goal, const ToolBackend& backend);

/// Feedback for a call outside the thread's permitted tool set.
std::string permission_denied_text(std::string_view tool);

/// Executes `call` iff its name is in `allowed`; otherwise ok=false with
/// the permission-denied text.
ToolResult dispatch(const ToolCall& call, const std::set<std::string>& allowed, const ToolBackend& backend);

}  // namespace agentloop
