#pragma once

// Shared vocabulary: scalars, geometry, roles, digests and the error hierarchy.

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mga {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed document or expression. `where` names the offending path
// ("elements[2].id") or character offset ("offset 14").
class ParseError : public Error {
public:
    ParseError(std::string where, const std::string& what)
        : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class OutOfBounds : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Scalars
// ---------------------------------------------------------------------------

using Scalar = std::variant<bool, std::int64_t, double, std::string>;

inline bool scalar_equal(const Scalar& a, const Scalar& b) {
    auto as_number = [](const Scalar& s) -> std::optional<double> {
        if (auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
        if (auto* d = std::get_if<double>(&s)) return *d;
        return std::nullopt;
    };
    auto na = as_number(a);
    auto nb = as_number(b);
    if (na && nb) return *na == *nb;
    return a == b;
}

inline Json scalar_to_json(const Scalar& s) {
    return std::visit([](const auto& v) { return Json(v); }, s);
}

inline Scalar scalar_from_json(const Json& j, const std::string& where) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw ParseError(where, "expected a scalar (bool, number or string)");
}

inline std::string scalar_to_text(const Scalar& s) {
    struct {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const { return Json(d).dump(); }
        std::string operator()(const std::string& str) const { return Json(str).dump(); }
    } visitor;
    return std::visit(visitor, s);
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Half-open pixel box: covers [x, x+w) x [y, y+h).
struct BBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool contains(Point p) const { return p.x >= x && p.x < x + w && p.y >= y && p.y < y + h; }
    bool contains(const BBox& o) const {
        return o.x >= x && o.y >= y && o.x + o.w <= x + w && o.y + o.h <= y + h;
    }
    // Floor of the geometric center.
    Point centroid() const { return {x + w / 2, y + h / 2}; }
    // Centroid followed by the four inclusive pixel corners.
    std::array<Point, 5> probe_points() const {
        return {{centroid(), {x, y}, {x + w - 1, y}, {x, y + h - 1}, {x + w - 1, y + h - 1}}};
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

inline Json bbox_to_json(const BBox& b) { return Json::array({b.x, b.y, b.w, b.h}); }

// ---------------------------------------------------------------------------
// Roles
// ---------------------------------------------------------------------------

enum class Role { button, text_field, menu, menu_item, checkbox, dialog, list, tab, scroll_region, label };

inline constexpr std::array<std::string_view, 10> kRoleNames = {
    "button", "text_field", "menu", "menu_item", "checkbox",
    "dialog", "list", "tab", "scroll_region", "label"};

inline std::string_view to_string(Role r) { return kRoleNames[static_cast<std::size_t>(r)]; }

inline std::optional<Role> parse_role(std::string_view s) {
    for (std::size_t i = 0; i < kRoleNames.size(); ++i)
        if (kRoleNames[i] == s) return static_cast<Role>(i);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Digests
// ---------------------------------------------------------------------------

namespace detail {
inline std::string evp_hex(const EVP_MD* md, std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, md, nullptr) != 1)
        throw Error("digest computation failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kHex[out[i] >> 4]);
        hex.push_back(kHex[out[i] & 0xF]);
    }
    return hex;
}
}  // namespace detail

inline std::string sha256_hex(std::string_view bytes) { return detail::evp_hex(EVP_sha256(), bytes); }
inline std::string md5_hex(std::string_view bytes) { return detail::evp_hex(EVP_md5(), bytes); }

// 16-hex-char prefix of SHA-256; used for action keys.
inline std::string short_digest(std::string_view bytes) { return sha256_hex(bytes).substr(0, 16); }

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

// Lowercases ASCII and collapses whitespace runs; trims both ends.
inline std::string normalize_label(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

}  // namespace mga
