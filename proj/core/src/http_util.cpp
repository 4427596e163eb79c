#include "http_util.hpp"

#include "effectcast/error.hpp"

namespace effectcast::detail {

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::Config, "endpoint '" + url + "' has no scheme");
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw Error(ErrorCode::Config, "endpoint '" + url + "': unsupported scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (out.origin.size() <= scheme_end + 3) {
        throw Error(ErrorCode::Config, "endpoint '" + url + "' has no host");
    }
    return out;
}

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& url,
                                             std::chrono::seconds timeout) {
    auto client = std::make_unique<httplib::Client>(url.origin);
    if (!client->is_valid()) {
        throw Error(ErrorCode::Config, "cannot build HTTP client for " + url.origin);
    }
    client->set_connection_timeout(timeout);
    client->set_read_timeout(timeout);
    client->set_write_timeout(timeout);
    return client;
}

}  // namespace effectcast::detail
