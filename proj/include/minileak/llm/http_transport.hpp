#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "minileak/llm/backend.hpp"

namespace minileak::llm {

/// Transport backed by cpp-httplib; `url` is scheme://host[:port]/path.
class HttpTransport : public Transport {
public:
    HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                      const std::string& body, int timeout_seconds) override {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) return HttpResponse{0, {}, "invalid endpoint URL '" + url + "'"};
        const auto path_start = url.find('/', scheme_end + 3);
        const auto base = url.substr(0, path_start);
        const auto path = path_start == std::string::npos ? std::string("/") : url.substr(path_start);

        httplib::Client client(base);
        client.set_connection_timeout(timeout_seconds, 0);
        client.set_read_timeout(timeout_seconds, 0);
        client.set_write_timeout(timeout_seconds, 0);
        httplib::Headers h;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") content_type = v;
            else h.emplace(k, v);
        }
        auto res = client.Post(path, h, body, content_type);
        if (!res) return HttpResponse{0, {}, httplib::to_string(res.error())};
        return HttpResponse{res->status, res->body, {}};
    }
};

} // namespace minileak::llm
