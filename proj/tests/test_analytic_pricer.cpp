#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <pwheston/analytic_pricer.hpp>
#include <pwheston/mc_oracle.hpp>

#include "oracles/fixed_grid.hpp"

using namespace pwh;

namespace {

const Market kEurUsd{1.33, 0.0025, 0.0005};

PiecewiseHestonParams eurusd_2m() { return PiecewiseHestonParams::constant(0.00675, 1.04, 0.0199, -0.276, 0.313, 2.0 / 12); }
PiecewiseHestonParams eurusd_1y() { return PiecewiseHestonParams::constant(0.00674, 0.92, 0.0166, -0.239, 0.19, 1.0); }

PiecewiseHestonParams rising_schedule() {
    return {0.006,
            {{0.0, 1.0 / 12, 1.443, 0.010, -0.321, 0.277},
             {1.0 / 12, 2.0 / 12, 4.985, 0.012, -0.693, 0.198},
             {2.0 / 12, 0.5, 2.430, 0.007, -0.437, 0.268},
             {0.5, 1.0, 1.613, 0.016, -0.503, 0.328}}};
}

PiecewiseHestonParams bs_degenerate(double v0, double T) { return PiecewiseHestonParams::constant(v0, 1.5, v0, 0.0, 1e-8, T); }

// Plain-probability call price with both integrals done on a fixed grid.
double plain_price_fixed_grid(const PiecewiseHestonParams& p, const Market& m, double T, double K) {
    auto integral = [&](ProbIndex j) {
        return oracle::simpson_richardson([&](double phi) { return plain_p_integrand(p, m, T, K, phi, j); }, 1e-9,
                                          2000.0, 100'000);
    };
    const double half = 0.5 * std::exp(-m.r_for * T);
    const double p1 = half + integral(ProbIndex::P1) / std::numbers::pi;
    const double p2 = half + integral(ProbIndex::P2) / std::numbers::pi;
    return m.spot * p1 - std::exp(-m.drift() * T) * K * p2;
}

}  // namespace

TEST(HestonCallCv, BlackScholesLimit) {
    const double v0 = 0.0144;
    const auto p = bs_degenerate(v0, 1.0);
    for (double K : {1.1, 1.33, 1.6}) {
        EXPECT_NEAR(heston_call_cv(p, kEurUsd, 1.0, K), bs_call_price(MarketSlice(kEurUsd, 1.0), 0.12, K), 1e-5);
        for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
            EXPECT_NEAR(tilde_p(p, kEurUsd, 1.0, K, j), 0.0, 1e-6);
            for (double phi = 0.01; phi < 100.0; phi *= 1.7)
                EXPECT_LT(std::abs(tilde_p_integrand(p, kEurUsd, 1.0, K, phi, j)), 1e-5);
        }
    }
}

TEST(HestonCallCv, IdenticalSegmentRefinementIsInvariant) {
    const auto p = rising_schedule();
    const auto q = p.split_at(2, 0.3).split_at(0, 0.04);
    for (double K : {1.2, 1.33, 1.45}) {
        const double a = heston_call_cv(p, kEurUsd, 1.0, K);
        EXPECT_NEAR(heston_call_cv(q, kEurUsd, 1.0, K), a, 1e-10 * a);
    }
}

TEST(TildePIntegrand, OriginLimitIsMeanLogSpotDifference) {
    // As phi -> 0 the j=2 integrand tends to E^H[ln S_T] - E^BS[ln S_T]
    //   = -(theta - v0)/2 (tau - (1 - e^{-kappa tau})/kappa).
    const auto p = eurusd_2m();
    const Market m{1.33, 0.0, 0.0};
    const double tau = 2.0 / 12, k = 1.04;
    const double expected = -0.5 * (0.0199 - 0.00675) * (tau - (1.0 - std::exp(-k * tau)) / k);
    EXPECT_NEAR(tilde_p_integrand(p, m, tau, 1.3 * 1.33, 1e-5, ProbIndex::P2), expected, 1e-4 * std::abs(expected));
    // with the control variate the origin value is several orders below the plain integrand
    const double cv = std::abs(tilde_p_integrand(p, m, tau, 1.3 * 1.33, 0.01, ProbIndex::P2));
    const double plain = std::abs(plain_p_integrand(p, m, tau, 1.3 * 1.33, 0.01, ProbIndex::P2));
    EXPECT_LT(cv, 1e-3 * plain);
}

TEST(TildePIntegrand, MatchesConjugateEvaluation) {
    const auto p = eurusd_2m();
    for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
        const double K = 1.3 * kEurUsd.spot, phi = 1.0;
        const cplx fh = heston_char_fn(p, kEurUsd, 2.0 / 12, -phi, j);
        const cplx fbs = bs_char_fn(kEurUsd, std::sqrt(p.v0), 2.0 / 12, -phi, j);
        const double direct = (std::polar(1.0, phi * std::log(K)) * (fh - fbs) / cplx(0.0, -phi)).real();
        EXPECT_NEAR(tilde_p_integrand(p, kEurUsd, 2.0 / 12, K, phi, j), direct, 1e-15);
    }
}

TEST(TildeP, ReconstructedProbabilitiesAreProbabilities) {
    for (const auto& [p, T] : {std::pair{eurusd_2m(), 2.0 / 12}, std::pair{eurusd_1y(), 1.0}, std::pair{rising_schedule(), 1.0}}) {
        const MarketSlice s(kEurUsd, T);
        const double sigma = std::sqrt(p.v0);
        for (double K : {1.2, 1.33, 1.5}) {
            const double d1 = detail::d1(s, sigma, K);
            const double nd[2] = {norm_cdf(d1), norm_cdf(d1 - sigma * std::sqrt(T))};
            for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
                const int idx = j == ProbIndex::P1 ? 0 : 1;
                // Black-Scholes probability from the fixed-grid integral of the plain integrand
                const double bs_integral = oracle::simpson_richardson(
                    [&](double phi) {
                        const cplx f = bs_char_fn(kEurUsd, sigma, T, phi, j);
                        return (std::polar(1.0, -phi * std::log(K)) * f / cplx(0.0, phi)).real();
                    },
                    1e-9, 2000.0, 50'000);
                const double pbs = (0.5 * s.df_for() + bs_integral / std::numbers::pi) / s.df_for();
                EXPECT_NEAR(pbs, nd[idx], 1e-8);
                const double ph = pbs + tilde_p(p, kEurUsd, T, K, j) / s.df_for();
                EXPECT_GE(ph, 0.0);
                EXPECT_LE(ph, 1.0);
            }
        }
    }
}

TEST(HestonCallCv, AgreesWithPlainProbabilities) {
    for (const auto& [p, T] : {std::pair{eurusd_2m(), 2.0 / 12}, std::pair{eurusd_1y(), 1.0}, std::pair{rising_schedule(), 1.0}})
        for (double K : {1.25, 1.33, 1.4}) {
            EXPECT_NEAR(heston_call_cv(p, kEurUsd, T, K), plain_price_fixed_grid(p, kEurUsd, T, K), 1e-7);
            EXPECT_NEAR(heston_call_cv(p, kEurUsd, T, K), heston_call_plain_detail(p, kEurUsd, T, K).price, 1e-9);
        }
}

TEST(HestonCallCv, DecreasingConvexAndBounded) {
    const auto p = rising_schedule();
    const MarketSlice s(kEurUsd, 1.0);
    std::vector<double> strikes, prices;
    for (int i = 0; i < 50; ++i) {
        strikes.push_back(1.0 + 0.015 * i);
        prices.push_back(heston_call_cv(p, kEurUsd, 1.0, strikes.back()));
        EXPECT_GE(prices.back(), std::max(s.spot * s.df_for() - strikes.back() * s.df_dom(), 0.0));
        EXPECT_LE(prices.back(), s.spot * s.df_for());
    }
    for (int i = 1; i < 50; ++i) EXPECT_LT(prices[i], prices[i - 1]);
    for (int i = 1; i < 49; ++i) EXPECT_GE(prices[i - 1] - 2.0 * prices[i] + prices[i + 1], -1e-10);
}

TEST(HestonCallCv, AgreesWithMonteCarlo) {
    MCConfig cfg;
    cfg.paths = 400'000;
    cfg.steps_per_year = 730;
    const double T = 2.0 / 12;
    const auto r = mc_price(eurusd_2m(), kEurUsd, VanillaSpec{OptionType::Call, kEurUsd.spot, T}, cfg);
    EXPECT_LT(std::abs(heston_call_cv(eurusd_2m(), kEurUsd, T, kEurUsd.spot) - r.price), 3.0 * r.std_error);
}

TEST(HestonPutCv, ParityAndInputChecks) {
    const auto p = eurusd_1y();
    const MarketSlice s(kEurUsd, 1.0);
    EXPECT_NEAR(heston_call_cv(p, kEurUsd, 1.0, 1.3) - heston_put_cv(p, kEurUsd, 1.0, 1.3),
                s.spot * s.df_for() - 1.3 * s.df_dom(), 1e-14);
    EXPECT_GT(heston_put_cv(p, kEurUsd, 1.0, 1.3), 0.0);
    EXPECT_THROW(heston_call_cv(p, kEurUsd, 1.5, 1.3), std::domain_error);
    EXPECT_THROW(heston_call_cv(p, kEurUsd, 1.0, -1.0), std::domain_error);
}

TEST(PriceSmile, FlatInBlackScholesLimit) {
    const double v0 = 0.0081;
    for (const auto& pt : price_smile(bs_degenerate(v0, 0.5), kEurUsd, 0.5, standard_deltas()))
        EXPECT_NEAR(pt.implied_vol, 0.09, 1e-4);
}

TEST(PriceSmile, StrikesAreConsistentWithModelVols) {
    const MarketSlice s(kEurUsd, 2.0 / 12);
    for (const auto& pt : price_smile(eurusd_2m(), kEurUsd, 2.0 / 12, standard_deltas())) {
        if (pt.delta.is_atm()) {
            EXPECT_NEAR(pt.strike, s.forward() * std::exp(0.5 * pt.implied_vol * pt.implied_vol * s.tau), 1e-7);
        } else {
            EXPECT_NEAR(strike_to_delta(s, pt.implied_vol, pt.strike, pt.delta.type()), pt.delta.value(), 1e-7);
        }
        EXPECT_NEAR(bs_call_price(s, pt.implied_vol, pt.strike), pt.price, 1e-12);
    }
}

TEST(PriceSmile, NegativeCorrelationSkewsTowardPuts) {
    const auto smile = price_smile(eurusd_2m(), kEurUsd, 2.0 / 12, standard_deltas());
    EXPECT_GT(smile.front().implied_vol, smile.back().implied_vol);
}

TEST(PriceSmile, RisingScheduleGivesRisingAtmTermStructure) {
    double prev = 0.0;
    for (double T : {1.0 / 12, 2.0 / 12, 0.5, 1.0}) {
        const auto atm = price_smile(rising_schedule(), kEurUsd, T, {Delta::atm()}).front();
        EXPECT_GT(atm.implied_vol, prev) << "T=" << T;
        prev = atm.implied_vol;
    }
}

TEST(PriceSmile, FlatStrikeModeUsesSqrtV0) {
    SmileConfig cfg;
    cfg.mode = SmileStrikeMode::FlatBlackScholes;
    const MarketSlice s(kEurUsd, 1.0);
    const auto pt = price_smile(eurusd_1y(), kEurUsd, 1.0, {Delta::of(0.25)}, cfg).front();
    EXPECT_DOUBLE_EQ(pt.strike, delta_to_strike(s, std::sqrt(0.00674), Delta::of(0.25)));
}
