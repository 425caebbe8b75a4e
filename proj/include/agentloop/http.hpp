#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace agentloop {

struct HttpRequest {
    std::string method = "POST";
    std::string url;
    std::map<std::string, std::string> headers;
    std::string body;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// nullopt means the server could not be reached at all.
using HttpTransport = std::function<std::optional<HttpResponse>(const HttpRequest&)>;

HttpTransport make_http_transport(std::chrono::seconds timeout = std::chrono::seconds(120));

struct UrlParts {
    std::string scheme_host_port;
    std::string path;
};

/// Splits "https://host:port/path?q" into "https://host:port" and "/path?q".
std::optional<UrlParts> split_url(const std::string& url);

}  // namespace agentloop
