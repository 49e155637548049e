#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>

#include "semform/error.hpp"
#include "semform/providers.hpp"

namespace semform {

namespace {

// "https://host:port/v1/chat" -> ("https://host:port", "/v1/chat")
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError(fmt::format("malformed URL {}", url), 1, 0);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttpTransport::post(const std::string& url, const std::string& body,
                                 const std::map<std::string, std::string>& headers, std::chrono::seconds timeout) {
    const auto [base, path] = split_url(url);
    httplib::Client client(base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
        if (k == "Content-Type")
            content_type = v;
        else
            h.emplace(k, v);
    }
    auto res = client.Post(path, h, body, content_type);
    if (!res) throw TransportError(fmt::format("{}: {}", url, httplib::to_string(res.error())), 1, 0);
    return {res->status, res->body};
}

}  // namespace semform
