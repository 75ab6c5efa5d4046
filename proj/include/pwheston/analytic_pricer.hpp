#pragma once

// Semi-analytic vanilla pricing under the piecewise Heston model with the
// Black-Scholes control variate:
//
//   C(K) = C_BS(K; sigma = sqrt(v0)) + S P~_1 - e^{-(r_d - r_f) tau} K P~_2,
//   P~_j = 1/pi int_0^inf Re[ e^{-i phi ln K} (f_j^H - f_j^BS) / (i phi) ] dphi.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "black_scholes.hpp"
#include "charfn.hpp"
#include "heston_params.hpp"
#include "market.hpp"
#include "quadrature.hpp"

namespace pwh {

/// Integrand of P~_j at phi > 0.
inline double tilde_p_integrand(const PiecewiseHestonParams& p, const Market& m, double T, double strike,
                                double phi, ProbIndex j) {
    const cplx fh = heston_char_fn(p, m, T, phi, j);
    const cplx fbs = bs_char_fn(m, std::sqrt(p.v0), T, phi, j);
    const cplx z = std::exp(cplx(0.0, -phi * std::log(strike))) * (fh - fbs) / cplx(0.0, phi);
    return z.real();
}

/// Integrand of the uncorrected probability integral, Re[e^{-i phi ln K} f_j / (i phi)].
inline double plain_p_integrand(const PiecewiseHestonParams& p, const Market& m, double T, double strike,
                                double phi, ProbIndex j) {
    const cplx fh = heston_char_fn(p, m, T, phi, j);
    const cplx z = std::exp(cplx(0.0, -phi * std::log(strike))) * fh / cplx(0.0, phi);
    return z.real();
}

inline QuadratureResult tilde_p_integral(const PiecewiseHestonParams& p, const Market& m, double T,
                                         double strike, ProbIndex j, const QuadratureConfig& cfg = {}) {
    auto r = integrate_semi_infinite(
        [&](double phi) { return tilde_p_integrand(p, m, T, strike, phi, j); }, cfg);
    r.value *= std::numbers::inv_pi;
    r.error *= std::numbers::inv_pi;
    return r;
}

/// Difference of Heston and Black-Scholes probabilities (not clamped; may be negative).
inline double tilde_p(const PiecewiseHestonParams& p, const Market& m, double T, double strike, ProbIndex j,
                      const QuadratureConfig& cfg = {}) {
    return tilde_p_integral(p, m, T, strike, j, cfg).value;
}

namespace detail {

inline void check_pricing_inputs(const PiecewiseHestonParams& p, const Market& m, double T, double strike) {
    p.validate();
    m.validate();
    if (!(strike > 0.0)) throw std::domain_error("heston pricer: strike must be positive");
    if (!(T > 0.0)) throw std::domain_error("heston pricer: maturity must be positive");
    if (T > p.horizon() * (1.0 + 1e-14))
        throw std::domain_error("heston pricer: maturity beyond parameter schedule");
}

}  // namespace detail

struct CallPriceDetail {
    double price = 0.0;
    double bs_price = 0.0;
    double tilde_p1 = 0.0;
    double tilde_p2 = 0.0;
    std::size_t evaluations = 0;
};

inline CallPriceDetail heston_call_cv_detail(const PiecewiseHestonParams& p, const Market& m, double T,
                                            double strike, const QuadratureConfig& cfg = {}) {
    detail::check_pricing_inputs(p, m, T, strike);
    const MarketSlice slice(m, T);
    CallPriceDetail out;
    out.bs_price = bs_call_price(slice, std::sqrt(p.v0), strike);
    const auto i1 = tilde_p_integral(p, m, T, strike, ProbIndex::P1, cfg);
    const auto i2 = tilde_p_integral(p, m, T, strike, ProbIndex::P2, cfg);
    out.tilde_p1 = i1.value;
    out.tilde_p2 = i2.value;
    out.evaluations = i1.evaluations + i2.evaluations;
    out.price = out.bs_price + m.spot * out.tilde_p1 - std::exp(-m.drift() * T) * strike * out.tilde_p2;
    return out;
}

/// Vanilla call under the piecewise Heston model via the control variate.
inline double heston_call_cv(const PiecewiseHestonParams& p, const Market& m, double T, double strike,
                             const QuadratureConfig& cfg = {}) {
    return heston_call_cv_detail(p, m, T, strike, cfg).price;
}

/// Vanilla call from the uncorrected probabilities,
///   C = S (e^{-r_f T}/2 + I_1/pi) - e^{-rT} K (e^{-r_f T}/2 + I_2/pi).
/// Kept for comparison with the control-variate route.
inline CallPriceDetail heston_call_plain_detail(const PiecewiseHestonParams& p, const Market& m, double T,
                                               double strike, const QuadratureConfig& cfg = {}) {
    detail::check_pricing_inputs(p, m, T, strike);
    CallPriceDetail out;
    const double half = 0.5 * std::exp(-m.r_for * T);
    auto integral = [&](ProbIndex j) {
        auto r = integrate_semi_infinite([&](double phi) { return plain_p_integrand(p, m, T, strike, phi, j); },
                                         cfg);
        out.evaluations += r.evaluations;
        return half + std::numbers::inv_pi * r.value;
    };
    const double p1 = integral(ProbIndex::P1);
    const double p2 = integral(ProbIndex::P2);
    out.tilde_p1 = p1;
    out.tilde_p2 = p2;
    out.price = m.spot * p1 - std::exp(-m.drift() * T) * strike * p2;
    return out;
}

inline double heston_put_cv(const PiecewiseHestonParams& p, const Market& m, double T, double strike,
                            const QuadratureConfig& cfg = {}) {
    const MarketSlice s(m, T);
    return heston_call_cv(p, m, T, strike, cfg) - s.spot * s.df_for() + strike * s.df_dom();
}

enum class SmileStrikeMode {
    ModelFixedPoint,  ///< strike consistent with the model implied vol at that strike
    FlatBlackScholes, ///< strike from the flat vol sqrt(v0)
};

struct SmileConfig {
    SmileStrikeMode mode = SmileStrikeMode::ModelFixedPoint;
    DeltaQuoteConvention convention{};
    double strike_tolerance = 1e-8;
    int max_iterations = 50;
    QuadratureConfig quadrature{};
};

struct SmilePoint {
    Delta delta;
    double strike;
    double price;  ///< call price
    double implied_vol;
};

/// Model smile at quoted deltas.
inline std::vector<SmilePoint> price_smile(const PiecewiseHestonParams& p, const Market& m, double T,
                                           const std::vector<Delta>& deltas, const SmileConfig& cfg = {}) {
    const MarketSlice slice(m, T);
    slice.validate();
    std::vector<SmilePoint> out;
    out.reserve(deltas.size());
    for (const auto& delta : deltas) {
        double vol = std::sqrt(p.v0);
        double strike = delta_to_strike(slice, vol, delta, cfg.convention);
        double price = heston_call_cv(p, m, T, strike, cfg.quadrature);
        vol = implied_vol(slice, strike, price);
        if (cfg.mode == SmileStrikeMode::ModelFixedPoint) {
            bool converged = false;
            for (int it = 0; it < cfg.max_iterations; ++it) {
                const double next = delta_to_strike(slice, vol, delta, cfg.convention);
                const double step = std::abs(next - strike);
                strike = next;
                price = heston_call_cv(p, m, T, strike, cfg.quadrature);
                vol = implied_vol(slice, strike, price);
                if (step <= cfg.strike_tolerance * strike) {
                    converged = true;
                    break;
                }
            }
            if (!converged) throw std::domain_error("price_smile: delta/strike fixed point did not converge");
        }
        out.push_back({delta, strike, price, vol});
    }
    return out;
}

/// The five standard quotes: 15/25 delta puts, ATM, 25/15 delta calls.
inline std::vector<Delta> standard_deltas() {
    return {Delta::of(-0.15), Delta::of(-0.25), Delta::atm(), Delta::of(0.25), Delta::of(0.15)};
}

}  // namespace pwh
