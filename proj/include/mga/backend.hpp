#pragma once

// Model-backend boundary. Every model-dependent call in the library goes
// through ModelBackend::complete(); the network variant lives in
// mga/remote.hpp so that nothing else links an HTTP client.

#include "mga/core.hpp"

#include <charconv>
#include <chrono>
#include <deque>
#include <functional>
#include <mutex>

namespace mga::backend {

class BackendError : public Error {
public:
    using Error::Error;
};

enum class RoleTag { observer, planner, memory };

inline std::string_view to_string(RoleTag r) {
    switch (r) {
        case RoleTag::observer: return "observer";
        case RoleTag::planner: return "planner";
        case RoleTag::memory: return "memory";
    }
    return "?";
}

inline std::optional<RoleTag> parse_role_tag(std::string_view s) {
    for (RoleTag r : {RoleTag::observer, RoleTag::planner, RoleTag::memory})
        if (to_string(r) == s) return r;
    return std::nullopt;
}

// Fixed field order per role tag.
inline const std::vector<std::string>& field_order(RoleTag r) {
    static const std::vector<std::string> kObserver{"frame"};
    static const std::vector<std::string> kPlanner{"instruction", "observation", "memory_digest"};
    static const std::vector<std::string> kMemory{"instruction", "memory", "analysis"};
    switch (r) {
        case RoleTag::observer: return kObserver;
        case RoleTag::planner: return kPlanner;
        case RoleTag::memory: return kMemory;
    }
    return kObserver;
}

struct PromptBundle {
    RoleTag role_tag = RoleTag::planner;
    std::vector<std::pair<std::string, std::string>> fields;

    // Checks field names and order against the role tag.
    static PromptBundle make(RoleTag tag, std::vector<std::pair<std::string, std::string>> fields) {
        const auto& order = field_order(tag);
        if (fields.size() != order.size())
            throw BackendError("bundle for " + std::string(to_string(tag)) + " needs " +
                               std::to_string(order.size()) + " fields");
        for (std::size_t i = 0; i < order.size(); ++i)
            if (fields[i].first != order[i])
                throw BackendError("bundle field " + std::to_string(i) + " must be '" + order[i] + "'");
        return PromptBundle{tag, std::move(fields)};
    }

    std::size_t size_bytes() const {
        std::size_t n = 0;
        for (const auto& [name, text] : fields) n += name.size() + text.size();
        return n;
    }
    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

inline constexpr std::string_view kBundleMagic = "mga-bundle/1";

// Length-prefixed canonical text: injective, no timestamps.
inline std::string serialize_bundle(const PromptBundle& b) {
    std::string out(kBundleMagic);
    out += "\nrole_tag " + std::string(to_string(b.role_tag)) + "\n";
    for (const auto& [name, text] : b.fields) {
        out += "field " + name + " " + std::to_string(text.size()) + "\n";
        out += text;
        out += "\n";
    }
    return out;
}

inline PromptBundle parse_bundle(std::string_view s) {
    auto fail = [](const std::string& why) { return ParseError("bundle", why); };
    std::size_t pos = 0;
    auto line = [&]() -> std::string_view {
        auto nl = s.find('\n', pos);
        if (nl == std::string_view::npos) throw fail("truncated header");
        auto out = s.substr(pos, nl - pos);
        pos = nl + 1;
        return out;
    };
    if (line() != kBundleMagic) throw fail("bad magic");
    auto role_line = line();
    if (role_line.substr(0, 9) != "role_tag ") throw fail("missing role_tag");
    auto tag = parse_role_tag(role_line.substr(9));
    if (!tag) throw fail("unknown role_tag");
    PromptBundle b{*tag, {}};
    while (pos < s.size()) {
        auto header = line();
        if (header.substr(0, 6) != "field ") throw fail("expected field header");
        header.remove_prefix(6);
        auto space = header.rfind(' ');
        if (space == std::string_view::npos) throw fail("field header needs a length");
        std::size_t len = 0;
        auto digits = header.substr(space + 1);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), len);
        if (ec != std::errc{} || ptr != digits.data() + digits.size()) throw fail("bad field length");
        if (pos + len + 1 > s.size() || s[pos + len] != '\n') throw fail("field body truncated");
        b.fields.emplace_back(std::string(header.substr(0, space)), std::string(s.substr(pos, len)));
        pos += len + 1;
    }
    return b;
}

struct BackendResponse {
    std::string text;
    std::chrono::milliseconds latency{0};
};

class ModelBackend {
public:
    explicit ModelBackend(std::size_t max_bundle_bytes = 1 << 20) : max_bundle_bytes_(max_bundle_bytes) {}
    virtual ~ModelBackend() = default;

    // Rejects oversized bundles before dispatch.
    BackendResponse complete(const PromptBundle& bundle) {
        if (bundle.size_bytes() > max_bundle_bytes_)
            throw BackendError("bundle of " + std::to_string(bundle.size_bytes()) + " bytes exceeds limit of " +
                               std::to_string(max_bundle_bytes_));
        auto start = std::chrono::steady_clock::now();
        BackendResponse r{dispatch(bundle), {}};
        r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        return r;
    }

    std::size_t max_bundle_bytes() const { return max_bundle_bytes_; }

protected:
    virtual std::string dispatch(const PromptBundle& bundle) = 0;

private:
    std::size_t max_bundle_bytes_;
};

// Replays queued replies in order; fails once exhausted.
class ScriptedBackend final : public ModelBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> replies, std::size_t max_bundle_bytes = 1 << 20)
        : ModelBackend(max_bundle_bytes), replies_(replies.begin(), replies.end()) {}

    std::size_t remaining() const {
        std::lock_guard lock(mutex_);
        return replies_.size();
    }

protected:
    std::string dispatch(const PromptBundle&) override {
        std::lock_guard lock(mutex_);
        if (replies_.empty()) throw BackendError("scripted backend exhausted");
        std::string reply = std::move(replies_.front());
        replies_.pop_front();
        return reply;
    }

private:
    mutable std::mutex mutex_;
    std::deque<std::string> replies_;
};

// Reply computed locally from the bundle.
class ComputedBackend final : public ModelBackend {
public:
    using Fn = std::function<std::string(const PromptBundle&)>;
    explicit ComputedBackend(Fn fn, std::size_t max_bundle_bytes = 1 << 20)
        : ModelBackend(max_bundle_bytes), fn_(std::move(fn)) {}

protected:
    std::string dispatch(const PromptBundle& bundle) override { return fn_(bundle); }

private:
    Fn fn_;
};

}  // namespace mga::backend
