#pragma once

#include "calspread/error.hpp"
#include "calspread/leg.hpp"
#include "calspread/price.hpp"

#include <cmath>

namespace calspread {

struct EntryExit {
    Price entry; // bid on F_n minus ask on F_c at entry
    Price exit;  // ask on F_n minus bid on F_c at exit
    Price profit;
};

inline EntryExit entry_exit_profit(Price entry_bid_n, Price entry_ask_c, Price exit_ask_n, Price exit_bid_c) {
    EntryExit r;
    r.entry = entry_bid_n - entry_ask_c;
    r.exit = exit_ask_n - exit_bid_c;
    r.profit = r.entry - r.exit;
    return r;
}

enum class QuoteConvention {
    Coherent, // reference F_c: quote F_n at p_c^r + S
    Printed,  // reference F_c: quote F_n at S - p_c^r, as printed
};

/// Passive quote on the quoting leg given the reference VWAP and target spread.
/// reference = F_n quotes F_c at p_n^r - S.
inline Price quote_price(Leg reference, Price ref_vwap, Price spread,
                         QuoteConvention convention = QuoteConvention::Coherent) {
    if (ref_vwap.raw() <= 0) {
        fail(Errc::InvalidArgument, "reference price must be positive");
    }
    Price q;
    if (reference == Leg::Next) {
        q = ref_vwap - spread;
    } else {
        q = convention == QuoteConvention::Coherent ? ref_vwap + spread : spread - ref_vwap;
    }
    if (q.raw() <= 0) {
        fail(Errc::NonPositiveQuote, "quote " + q.to_string() + " is not positive");
    }
    return q;
}

struct RealizedSpread {
    Price realized; // S~
    Price slippage; // |S~ - S|
};

/// reference = F_c: S~ = p_n^b(t1) - p_c^b(t2), quoting fill on F_n then reference fill on F_c.
/// reference = F_n: S~ = p_n^a(t2) - p_c^a(t1), quoting fill on F_c then reference fill on F_n.
inline RealizedSpread realized_spread_and_slippage(Leg reference, Price quoting_fill, Price ref_fill, Price spread) {
    RealizedSpread r;
    r.realized = reference == Leg::Current ? quoting_fill - ref_fill : ref_fill - quoting_fill;
    r.slippage = abs(r.realized - spread);
    return r;
}

/// Cost-of-carry spread p_c (e^{R t} - 1).
inline double theoretical_spread(double p_c, double rate, double t) {
    if (!(p_c > 0)) {
        fail(Errc::InvalidArgument, "price must be positive");
    }
    return p_c * std::expm1(rate * t);
}

} // namespace calspread
