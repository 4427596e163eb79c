#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "httplib.h"

namespace effectcast::detail {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // at least "/"
};

ParsedUrl parse_url(const std::string& url);

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& url,
                                             std::chrono::seconds timeout);

}  // namespace effectcast::detail
