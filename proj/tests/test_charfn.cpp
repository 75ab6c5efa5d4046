#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <pwheston/charfn.hpp>

#include "oracles/riccati_rk.hpp"

using namespace pwh;

namespace {

const Market kUnit{1.0, 0.0, 0.0};
const Market kEurUsd{1.33, 0.0025, 0.0005};

// EUR/USD 2M, constant parameters
PiecewiseHestonParams eurusd_2m(double horizon = 2.0 / 12) {
    return PiecewiseHestonParams::constant(0.00675, 1.04, 0.0199, -0.276, 0.313, horizon);
}

PiecewiseHestonParams random_schedule(std::mt19937_64& rng, double horizon) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> nseg(1, 4);
    PiecewiseHestonParams p;
    p.v0 = 1e-4 + 0.2 * u(rng) * u(rng);
    const int n = nseg(rng);
    for (int i = 0; i < n; ++i) {
        HestonSegment s;
        s.t_start = horizon * i / n;
        s.t_end = horizon * (i + 1) / n;
        s.kappa = 0.05 + 5.95 * u(rng);
        s.theta = 0.3 * u(rng) * u(rng);
        s.rho = -1.0 + 2.0 * u(rng);
        s.xi = 1e-3 + 2.0 * u(rng);
        p.segments.push_back(s);
    }
    return p;
}

double rel_diff(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(BsCharFn, Identities) {
    EXPECT_NEAR(std::abs(bs_char_fn(kUnit, 0.3, 1.0, 0.0, ProbIndex::P2) - 1.0), 0.0, 1e-16);
    const Market foreign{1.0, 0.0, 0.03};
    EXPECT_NEAR(std::abs(bs_char_fn(foreign, 0.3, 1.0, 0.0, ProbIndex::P1) - std::exp(-0.03)), 0.0, 1e-16);
    const Market m{1.37, 0.01, 0.02};
    for (double phi : {0.5, 3.0, 40.0}) {
        const cplx expected = std::exp(cplx(0.0, phi * std::log(1.37)));
        EXPECT_NEAR(std::abs(bs_char_fn(m, 0.2, 0.0, phi, ProbIndex::P1) - expected), 0.0, 1e-15);
    }
}

TEST(BsCharFn, MeasureDrifts) {
    // log-spot mean under P2 is ln S + (r - sigma^2/2) tau, under P1 ln S + (r + sigma^2/2) tau
    const Market m{1.2, 0.03, 0.01};
    const double sigma = 0.25, tau = 0.8, h = 1e-5;
    for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
        const cplx f0 = bs_char_fn(m, sigma, tau, 0.0, j);
        const cplx fh = bs_char_fn(m, sigma, tau, h, j);
        const double mean = ((fh / f0 - 1.0) / cplx(0.0, h)).real();
        const double sign = j == ProbIndex::P1 ? 1.0 : -1.0;
        EXPECT_NEAR(mean, std::log(1.2) + (0.02 + sign * 0.5 * sigma * sigma) * tau, 1e-5);
    }
}

TEST(HestonCdStep, ZeroElapsedTimeIsIdentity) {
    const auto seg = eurusd_2m().segments[0];
    const CFState in{cplx(0.3, -0.2), cplx(-1.5, 0.7)};
    const auto out = heston_cd_step(seg, 0.4, 0.4, 2.5, ProbIndex::P1, in, kEurUsd);
    EXPECT_EQ(out.C, in.C);
    EXPECT_EQ(out.D, in.D);
}

TEST(HestonCdStep, FlowProperty) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_schedule(rng, 2.0);
        const auto& seg = p.segments[0];
        for (double phi : {0.3, 4.0, 25.0})
            for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
                const CFState in{cplx(0.01, 0.2), cplx(-0.5 * phi, 0.1 * phi)};
                const auto full = heston_cd_step(seg, 0.1, 1.9, phi, j, in, kEurUsd);
                const auto half = heston_cd_step(seg, 0.1, 0.7, phi, j, in, kEurUsd);
                const auto two = heston_cd_step(seg, 0.7, 1.9, phi, j, half, kEurUsd);
                EXPECT_LT(std::abs(full.C - two.C), 1e-12 * std::max(1.0, std::abs(full.C)));
                EXPECT_LT(std::abs(full.D - two.D), 1e-12 * std::max(1.0, std::abs(full.D)));
            }
    }
}

TEST(HestonCdStep, ZeroFrequencyMoneyMeasureStaysAtZero) {
    const auto out = heston_cd_step(eurusd_2m().segments[0], 0.0, 0.5, 0.0, ProbIndex::P2, {}, kUnit);
    EXPECT_EQ(std::abs(out.C), 0.0);
    EXPECT_EQ(std::abs(out.D), 0.0);
}

TEST(HestonCdStep, AgreesWithTanFormOnShortSteps) {
    const auto seg = eurusd_2m().segments[0];
    for (double phi : {0.5, 2.0, 10.0})
        for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
            const CFState in{cplx(0.0, 0.05), cplx(-0.2, 0.1)};
            const auto a = heston_cd_step(seg, 0.0, 0.05, phi, j, in, kEurUsd);
            const auto b = oracle::riccati_tan_form(seg, 0.0, 0.05, phi, j, in, kEurUsd);
            EXPECT_LT(std::abs(a.C - b.C), 1e-12);
            EXPECT_LT(std::abs(a.D - b.D), 1e-11);
        }
}

TEST(HestonCdStep, RejectsBackwardStep) {
    EXPECT_THROW(heston_cd_step(eurusd_2m().segments[0], 0.5, 0.4, 1.0, ProbIndex::P1, {}, kUnit),
                 std::domain_error);
}

TEST(HestonCharFn, ZeroFrequencyIsOne) {
    for (auto j : {ProbIndex::P1, ProbIndex::P2})
        EXPECT_NEAR(std::abs(heston_char_fn(eurusd_2m(), kUnit, 2.0 / 12, 0.0, j) - 1.0), 0.0, 1e-15);
}

TEST(HestonCharFn, IdenticalSegmentSplitIsInvariant) {
    const auto p = eurusd_2m(1.0);
    const auto split = p.split_at(0, 0.37);
    for (double phi : {0.1, 1.0, 7.0, 60.0})
        for (auto j : {ProbIndex::P1, ProbIndex::P2})
            EXPECT_LT(rel_diff(heston_char_fn(split, kEurUsd, 1.0, phi, j), heston_char_fn(p, kEurUsd, 1.0, phi, j)),
                      1e-12);
}

TEST(HestonCharFn, EurUsd2mMatchesRungeKutta) {
    const auto p = eurusd_2m();
    const cplx f = heston_char_fn(p, kUnit, 2.0 / 12, 1.0, ProbIndex::P2);
    ASSERT_TRUE(std::isfinite(f.real()) && std::isfinite(f.imag()));
    EXPECT_LT(rel_diff(f, oracle::heston_char_fn_rk(p, kUnit, 2.0 / 12, 1.0, ProbIndex::P2)), 1e-8);
}

TEST(HestonCharFn, RandomSchedulesMatchRungeKutta) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const double T = 0.1 + 1.9 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const auto p = random_schedule(rng, T);
        for (double phi : {0.5, 1.0, 5.0, 20.0})
            for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
                const cplx a = heston_char_fn(p, kEurUsd, T, phi, j);
                const cplx b = oracle::heston_char_fn_rk(p, kEurUsd, T, phi, j);
                EXPECT_LT(rel_diff(a, b), 1e-8) << "trial " << trial << " phi " << phi;
            }
    }
}

TEST(HestonCharFn, LongMaturityStaysContinuous) {
    // Large vol-of-vol and long maturity wind the logarithm several times.
    PiecewiseHestonParams p{0.04, {{0.0, 3.0, 0.5, 0.09, -0.9, 1.8}, {3.0, 10.0, 3.0, 0.04, 0.4, 0.9}}};
    for (double phi : {2.0, 8.0, 15.0})
        for (auto j : {ProbIndex::P1, ProbIndex::P2})
            EXPECT_LT(rel_diff(heston_char_fn(p, kUnit, 10.0, phi, j), oracle::heston_char_fn_rk(p, kUnit, 10.0, phi, j)),
                      1e-8);
}

TEST(HestonCharFn, ConjugateSymmetry) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_schedule(rng, 1.0);
        for (double phi : {0.2, 3.0, 30.0})
            for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
                const cplx a = heston_char_fn(p, kEurUsd, 1.0, -phi, j);
                const cplx b = std::conj(heston_char_fn(p, kEurUsd, 1.0, phi, j));
                EXPECT_LE(std::abs(a - b), 1e-13 * std::max(1.0, std::abs(b)));
            }
    }
}

TEST(HestonCharFn, SmallVolOfVolMatchesBlackScholes) {
    const double v0 = 0.0144;
    const auto p = PiecewiseHestonParams::constant(v0, 1.7, v0, -0.4, 1e-8, 1.5);
    for (double phi : {0.5, 2.0, 10.0, 40.0})
        for (auto j : {ProbIndex::P1, ProbIndex::P2})
            EXPECT_LT(std::abs(heston_char_fn(p, kEurUsd, 1.5, phi, j) - bs_char_fn(kEurUsd, std::sqrt(v0), 1.5, phi, j)),
                      1e-5);
}

TEST(HestonCharFn, BoundedAndDecaying) {
    const auto p = PiecewiseHestonParams::constant(0.00674, 0.92, 0.0166, -0.239, 0.19, 1.0);
    for (auto j : {ProbIndex::P1, ProbIndex::P2}) {
        double prev = std::abs(heston_char_fn(p, kUnit, 1.0, 50.0, j));
        for (double phi = 55.0; phi <= 1000.0; phi += 5.0) {
            const auto st = heston_cd(p, kUnit, 1.0, phi, j);
            const double mag = std::abs(heston_char_fn(p, kUnit, 1.0, phi, j));
            EXPECT_LE(mag, std::exp(std::max(0.0, st.C.real() + st.D.real() * p.v0)) * (1.0 + 1e-14));
            EXPECT_LT(mag, prev);
            prev = mag;
        }
    }
}

TEST(HestonCharFn, MaturityBeyondScheduleIsDomainError) {
    EXPECT_THROW(heston_char_fn(eurusd_2m(), kUnit, 0.5, 1.0, ProbIndex::P1), std::domain_error);
    EXPECT_THROW(heston_char_fn(eurusd_2m(), kUnit, 0.0, 1.0, ProbIndex::P1), std::domain_error);
}

TEST(HestonCharFn, MaturityInsideLastSegment) {
    // pricing before the end of the schedule ignores the unused tail
    const auto p = eurusd_2m(1.0);
    const auto q = eurusd_2m(0.25);
    EXPECT_LT(rel_diff(heston_char_fn(p, kUnit, 0.25, 3.0, ProbIndex::P1), heston_char_fn(q, kUnit, 0.25, 3.0, ProbIndex::P1)),
              1e-14);
}
