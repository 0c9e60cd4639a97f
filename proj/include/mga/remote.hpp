#pragma once

// HTTP model backend. One POST per completion:
//   request  {"role_tag": ..., "fields": [{"name": ..., "text": ...}], "max_reply_length": N}
//   response {"text": ...}
// Transport failures and 5xx replies are retried with exponential backoff.

#include "mga/backend.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

namespace mga::backend {

struct RemoteConfig {
    std::string url;    // http://host[:port][/path]
    std::string token;  // sent as a bearer token when nonempty
    std::chrono::milliseconds timeout{30000};
    int retries = 2;
    std::chrono::milliseconds backoff{500};
    std::size_t max_bundle_bytes = 1 << 20;
    std::size_t max_reply_length = 8192;

    // MGA_BACKEND_URL / MGA_BACKEND_TOKEN
    static RemoteConfig from_env() {
        RemoteConfig c;
        if (const char* url = std::getenv("MGA_BACKEND_URL")) c.url = url;
        if (const char* token = std::getenv("MGA_BACKEND_TOKEN")) c.token = token;
        if (c.url.empty()) throw BackendError("MGA_BACKEND_URL is not set");
        return c;
    }
};

inline Json bundle_to_request(const PromptBundle& b, std::size_t max_reply_length) {
    Json fields = Json::array();
    for (const auto& [name, text] : b.fields) fields.push_back({{"name", name}, {"text", text}});
    return {{"role_tag", to_string(b.role_tag)}, {"fields", fields}, {"max_reply_length", max_reply_length}};
}

class RemoteBackend final : public ModelBackend {
public:
    explicit RemoteBackend(RemoteConfig config) : ModelBackend(config.max_bundle_bytes), config_(std::move(config)) {
        auto scheme = config_.url.find("://");
        if (scheme == std::string::npos || config_.url.substr(0, scheme) != "http")
            throw BackendError("backend URL must start with http://");
        auto slash = config_.url.find('/', scheme + 3);
        origin_ = config_.url.substr(0, slash);
        path_ = slash == std::string::npos ? "/" : config_.url.substr(slash);
    }

    int attempts_made() const { return attempts_.load(); }

protected:
    std::string dispatch(const PromptBundle& bundle) override {
        const std::string body = bundle_to_request(bundle, config_.max_reply_length).dump();
        httplib::Headers headers;
        if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

        std::string last_error;
        for (int attempt = 0; attempt <= config_.retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
            ++attempts_;
            httplib::Client client(origin_);
            client.set_connection_timeout(config_.timeout);
            client.set_read_timeout(config_.timeout);
            client.set_write_timeout(config_.timeout);
            auto res = client.Post(path_, headers, body, "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "server error " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) throw BackendError("backend replied with status " + std::to_string(res->status));
            try {
                Json reply = Json::parse(res->body);
                std::string text = reply.at("text").get<std::string>();
                if (text.size() > config_.max_reply_length) text.resize(config_.max_reply_length);
                return text;
            } catch (const Json::exception& e) {
                throw BackendError(std::string("malformed backend reply: ") + e.what());
            }
        }
        throw BackendError("backend unreachable after " + std::to_string(config_.retries + 1) +
                           " attempts: " + last_error);
    }

private:
    RemoteConfig config_;
    std::string origin_;
    std::string path_;
    std::atomic<int> attempts_{0};
};

}  // namespace mga::backend
