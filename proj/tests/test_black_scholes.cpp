#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include <pwheston/black_scholes.hpp>

using namespace pwh;

namespace {

// Root bracketing on the closed-form spot delta, independent of the
// inverse-normal route used by delta_to_strike.
double strike_by_bisection(const MarketSlice& s, double sigma, double target, OptionType type) {
    double lo = 1e-3 * s.spot, hi = 1e3 * s.spot;
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);
        const double d = strike_to_delta(s, sigma, mid, type);
        // delta decreases in strike for both calls and puts
        if (d > target)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

}  // namespace

TEST(BsCallPrice, AtmUnitVolReferenceValue) {
    // 2 N(0.1) - 1 evaluated at 30 digits
    EXPECT_NEAR(bs_call_price({1.0, 0.0, 0.0, 1.0}, 0.2, 1.0), 0.0796556745540580, 1e-13);
}

TEST(BsCallPrice, ZeroVolIsDiscountedIntrinsic) {
    EXPECT_EQ(bs_call_price({1.0, 0.0, 0.0, 1.0}, 0.0, 1.0), 0.0);
    EXPECT_EQ(bs_call_price({1.3, 0.0, 0.0, 2.0 / 12}, 0.0, 1.3 * 1.3), 0.0);
    const MarketSlice s{1.3, 0.02, 0.01, 0.5};
    EXPECT_DOUBLE_EQ(bs_call_price(s, 0.0, 1.0), 1.3 * std::exp(-0.005) - std::exp(-0.01));
}

TEST(BsCallPrice, RejectsBadInputs) {
    EXPECT_THROW(bs_call_price({1.0, 0.0, 0.0, 1.0}, 0.2, 0.0), std::domain_error);
    EXPECT_THROW(bs_call_price({1.0, 0.0, 0.0, 0.0}, 0.2, 1.0), std::domain_error);
    EXPECT_THROW(bs_call_price({1.0, 0.0, 0.0, 1.0}, -0.1, 1.0), std::domain_error);
}

TEST(BsCallPrice, WithinNoArbitrageBand) {
    const MarketSlice s{1.35, 0.03, 0.01, 0.75};
    for (double k = 0.8; k < 2.0; k += 0.05)
        for (double sigma : {0.0, 0.05, 0.2, 1.0}) {
            const double c = bs_call_price(s, sigma, k);
            EXPECT_GE(c, std::max(s.spot * s.df_for() - k * s.df_dom(), 0.0) - 1e-15);
            EXPECT_LE(c, s.spot * s.df_for());
        }
}

TEST(BsCallPrice, IncreasingInVol) {
    for (double tau : {0.05, 0.5, 2.0})
        for (double k : {0.7, 1.0, 1.4}) {
            const MarketSlice s{1.0, 0.01, 0.02, tau};
            double prev = bs_call_price(s, 0.01, k);
            for (double sigma = 0.02; sigma <= 1.0; sigma += 0.01) {
                const double c = bs_call_price(s, sigma, k);
                EXPECT_GE(bs_vega(s, sigma, k), 0.0);
                // strict once the time value is above rounding of the price
                if (c - std::max(s.spot * s.df_for() - k * s.df_dom(), 0.0) > 1e-12)
                    EXPECT_GT(c, prev) << "tau=" << tau << " K=" << k << " sigma=" << sigma;
                else
                    EXPECT_GE(c, prev);
                prev = c;
            }
        }
}

TEST(BsCallPrice, PutCallParity) {
    const MarketSlice s{1.2, 0.04, 0.015, 1.5};
    for (double k : {0.9, 1.2, 1.6})
        EXPECT_NEAR(bs_call_price(s, 0.15, k) - bs_put_price(s, 0.15, k),
                    s.spot * s.df_for() - k * s.df_dom(), 1e-14);
}

TEST(DeltaToStrike, AtmDeltaNeutralStraddle) {
    EXPECT_NEAR(delta_to_strike({1.0, 0.0, 0.0, 1.0}, 0.2, Delta::atm()), std::exp(0.02), 1e-15);
    // delta-neutral: call and put deltas cancel at that strike
    const MarketSlice s{1.3, 0.02, 0.005, 0.5};
    const double k = delta_to_strike(s, 0.11, Delta::atm());
    EXPECT_NEAR(strike_to_delta(s, 0.11, k, OptionType::Call) + strike_to_delta(s, 0.11, k, OptionType::Put), 0.0,
                1e-14);
}

TEST(DeltaToStrike, MatchesRootBracketing) {
    const MarketSlice s{1.0, 0.0, 0.0, 2.0 / 12};
    const double k = delta_to_strike(s, 0.08, Delta::of(0.25));
    EXPECT_NEAR(k, strike_by_bisection(s, 0.08, 0.25, OptionType::Call), 1e-12);
    EXPECT_LT(std::abs(strike_to_delta(s, 0.08, k, OptionType::Call) - 0.25), 1e-10);
}

TEST(DeltaToStrike, RoundTrip) {
    for (const MarketSlice& s : {MarketSlice{1.0, 0.0, 0.0, 2.0 / 12}, MarketSlice{1.33, 0.03, 0.01, 1.0}})
        for (double d : {-0.15, -0.25, 0.25, 0.15}) {
            const auto delta = Delta::of(d);
            const double k = delta_to_strike(s, 0.1, delta);
            EXPECT_NEAR(strike_to_delta(s, 0.1, k, delta.type()), d, 1e-12);
        }
}

TEST(DeltaToStrike, ForwardConvention) {
    const MarketSlice s{1.33, 0.03, 0.04, 1.0};
    const DeltaQuoteConvention conv{DeltaConvention::Forward, AtmConvention::Forward};
    const double k = delta_to_strike(s, 0.1, Delta::of(0.25), conv);
    EXPECT_NEAR(strike_to_delta(s, 0.1, k, OptionType::Call, DeltaConvention::Forward), 0.25, 1e-12);
    EXPECT_NEAR(delta_to_strike(s, 0.1, Delta::atm(), conv), s.forward(), 1e-15);
}

TEST(DeltaToStrike, UnattainableDeltaIsDomainError) {
    // spot delta is capped by e^{-r_f tau} ~ 0.61
    const MarketSlice s{1.0, 0.0, 0.5, 1.0};
    EXPECT_THROW(delta_to_strike(s, 0.1, Delta::of(0.9)), std::domain_error);
    EXPECT_THROW(Delta::of(1.0), std::domain_error);
    EXPECT_THROW(Delta::of(0.0), std::domain_error);
}

TEST(SpotDelta, CallMinusPutIsForeignDiscount) {
    const MarketSlice s{1.3, 0.02, 0.035, 0.7};
    for (double k = 0.9; k < 1.8; k += 0.1)
        EXPECT_NEAR(strike_to_delta(s, 0.12, k, OptionType::Call) - strike_to_delta(s, 0.12, k, OptionType::Put),
                    s.df_for(), 1e-12);
}

TEST(ImpliedVol, RoundTrip) {
    const MarketSlice s{1.0, 0.0, 0.0, 1.0};
    EXPECT_NEAR(implied_vol(s, 1.0, bs_call_price(s, 0.2, 1.0)), 0.2, 1e-10);
    EXPECT_NEAR(implied_vol(s, 1.0, 0.0796557), 0.2, 1e-6);
}

TEST(ImpliedVol, IdentityOverVolGrid) {
    for (const MarketSlice& s : {MarketSlice{1.0, 0.0, 0.0, 1.0}, MarketSlice{1.33, 0.02, 0.01, 0.25}})
        for (double k : {0.8 * s.spot, s.spot, 1.25 * s.spot})
            for (double sigma = 0.01; sigma <= 1.0; sigma += 0.01) {
                const double c = bs_call_price(s, sigma, k);
                // skip points where the price cannot resolve sigma to 1e-10 in double precision
                const double vega = bs_vega(s, sigma, k);
                if (!(vega > 0.0) || std::numeric_limits<double>::epsilon() * c / vega > 1e-11) continue;
                EXPECT_NEAR(implied_vol(s, k, c), sigma, 1e-10) << "K=" << k << " sigma=" << sigma;
            }
}

TEST(ImpliedVol, LowerBandEdgeGivesZero) {
    const MarketSlice s{1.0, 0.01, 0.0, 1.0};
    const double k = 0.9;
    EXPECT_EQ(implied_vol(s, k, s.spot - k * s.df_dom()), 0.0);
}

TEST(ImpliedVol, OutsideBandIsDomainError) {
    const MarketSlice s{1.0, 0.0, 0.0, 1.0};
    EXPECT_THROW(implied_vol(s, 0.9, 0.05), std::domain_error);  // below intrinsic 0.1
    EXPECT_THROW(implied_vol(s, 1.0, 1.0), std::domain_error);
    EXPECT_THROW(implied_vol(s, 1.0, -1e-3), std::domain_error);
}
