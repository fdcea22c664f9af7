#pragma once

#include <cstdint>
#include <string_view>

namespace calspread {

/// Contract of a two-leg calendar spread: F_c (current month) or F_n (next month).
enum class Leg : std::uint8_t { Current = 0, Next = 1 };

constexpr std::string_view to_string(Leg l) { return l == Leg::Current ? "c" : "n"; }

/// chi = 1 means the reference leg is F_n.
constexpr std::uint8_t to_chi(Leg reference) { return reference == Leg::Next ? 1 : 0; }
constexpr Leg from_chi(std::uint8_t chi) { return chi ? Leg::Next : Leg::Current; }

} // namespace calspread
