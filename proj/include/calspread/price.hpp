#pragma once

#include "calspread/error.hpp"

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

namespace calspread {

/// Fixed-point INR amount with four decimal places. Used for prices and for
/// signed spreads (differences of prices), so arithmetic on exchange prices
/// is exact.
class Price {
public:
    static constexpr std::int64_t kScale = 10'000;

    constexpr Price() = default;

    static constexpr Price from_raw(std::int64_t raw) { return Price(raw); }

    /// Nearest representable price; only for values that came from real arithmetic.
    static Price from_double(double inr) {
        const double scaled = inr * static_cast<double>(kScale);
        return Price(static_cast<std::int64_t>(scaled < 0 ? scaled - 0.5 : scaled + 0.5));
    }

    /// Exact decimal parse ("17458.55", "-0.5", "58"). At most four fractional digits.
    static std::optional<Price> parse(std::string_view text) {
        if (text.empty()) {
            return std::nullopt;
        }
        bool negative = false;
        if (text.front() == '-' || text.front() == '+') {
            negative = text.front() == '-';
            text.remove_prefix(1);
        }
        const auto dot = text.find('.');
        const std::string_view whole = text.substr(0, dot);
        std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
        if (whole.empty() && frac.empty()) {
            return std::nullopt;
        }
        std::int64_t units = 0;
        if (!whole.empty()) {
            const auto [ptr, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), units);
            if (ec != std::errc{} || ptr != whole.data() + whole.size()) {
                return std::nullopt;
            }
        }
        while (frac.size() > 4 && frac.back() == '0') {
            frac.remove_suffix(1);
        }
        if (frac.size() > 4) {
            return std::nullopt;
        }
        std::int64_t fraction = 0;
        for (char ch : frac) {
            if (ch < '0' || ch > '9') {
                return std::nullopt;
            }
            fraction = fraction * 10 + (ch - '0');
        }
        for (std::size_t k = frac.size(); k < 4; ++k) {
            fraction *= 10;
        }
        const std::int64_t raw = units * kScale + fraction;
        return Price(negative ? -raw : raw);
    }

    static Price parse_or_throw(std::string_view text) {
        auto p = parse(text);
        if (!p) {
            fail(Errc::InvalidArgument, "not a decimal price: '" + std::string(text) + "'");
        }
        return *p;
    }

    [[nodiscard]] constexpr std::int64_t raw() const { return raw_; }
    [[nodiscard]] constexpr double inr() const { return static_cast<double>(raw_) / kScale; }

    /// Decimal rendering with at least `min_decimals` fractional digits.
    [[nodiscard]] std::string to_string(int min_decimals = 2) const {
        const std::int64_t magnitude = raw_ < 0 ? -raw_ : raw_;
        std::string out = raw_ < 0 ? "-" : "";
        out += std::to_string(magnitude / kScale);
        std::string frac = std::to_string(magnitude % kScale);
        frac.insert(0, 4 - frac.size(), '0');
        while (static_cast<int>(frac.size()) > min_decimals && frac.back() == '0') {
            frac.pop_back();
        }
        if (!frac.empty()) {
            out += '.';
            out += frac;
        }
        return out;
    }

    [[nodiscard]] constexpr bool is_multiple_of(Price tick) const {
        return tick.raw_ > 0 && raw_ % tick.raw_ == 0;
    }

    constexpr Price operator-() const { return Price(-raw_); }
    constexpr Price operator+(Price o) const { return Price(raw_ + o.raw_); }
    constexpr Price operator-(Price o) const { return Price(raw_ - o.raw_); }
    constexpr Price& operator+=(Price o) { raw_ += o.raw_; return *this; }
    constexpr Price& operator-=(Price o) { raw_ -= o.raw_; return *this; }
    constexpr Price operator*(std::int64_t k) const { return Price(raw_ * k); }

    constexpr auto operator<=>(const Price&) const = default;

private:
    constexpr explicit Price(std::int64_t raw) : raw_(raw) {}
    std::int64_t raw_ = 0;
};

[[nodiscard]] inline Price abs(Price p) { return p.raw() < 0 ? -p : p; }

namespace literals {
inline Price operator""_inr(const char* text) { return Price::parse_or_throw(text); }
} // namespace literals

} // namespace calspread
