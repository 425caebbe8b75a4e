#include "agentloop/http.hpp"

#include <httplib.h>

namespace agentloop {

std::optional<UrlParts> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return std::nullopt;
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") return std::nullopt;
    const auto path_start = url.find('/', scheme_end + 3);
    UrlParts parts;
    if (path_start == std::string::npos) {
        parts.scheme_host_port = url;
        parts.path = "/";
    } else {
        parts.scheme_host_port = url.substr(0, path_start);
        parts.path = url.substr(path_start);
    }
    if (parts.scheme_host_port.size() <= scheme_end + 3) return std::nullopt;
    return parts;
}

HttpTransport make_http_transport(std::chrono::seconds timeout) {
    return [timeout](const HttpRequest& req) -> std::optional<HttpResponse> {
        auto parts = split_url(req.url);
        if (!parts) return std::nullopt;
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (parts->scheme_host_port.rfind("https", 0) == 0) return std::nullopt;
#endif
        httplib::Client client(parts->scheme_host_port);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        client.set_follow_location(true);

        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : req.headers) {
            if (k == "Content-Type") {
                content_type = v;
                continue;
            }
            headers.emplace(k, v);
        }

        httplib::Result res = req.method == "GET"
                                  ? client.Get(parts->path, headers)
                                  : client.Post(parts->path, headers, req.body, content_type);
        if (!res) return std::nullopt;
        return HttpResponse{res->status, res->body};
    };
}

}  // namespace agentloop
