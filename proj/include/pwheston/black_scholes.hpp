#pragma once

// Closed-form Black-Scholes for FX (Garman-Kohlhagen), delta/strike
// conversion and implied volatility inversion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

#include "market.hpp"

namespace pwh {

enum class OptionType { Call, Put };

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5); }

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double norm_inv(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_inv: probability outside (0,1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

inline void check_strike(double strike) {
    if (!(strike > 0.0) || !std::isfinite(strike))
        throw std::domain_error("black-scholes: strike must be positive");
}

inline void check_vol(double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::domain_error("black-scholes: volatility must be non-negative");
}

inline double d1(const MarketSlice& s, double sigma, double strike) {
    const double sd = sigma * std::sqrt(s.tau);
    return (std::log(s.spot / strike) + (s.drift() + 0.5 * sigma * sigma) * s.tau) / sd;
}

}  // namespace detail

/// Discounted call value S e^{-r_f tau} N(d1) - K e^{-r_d tau} N(d2).
/// sigma == 0 returns the discounted forward intrinsic value.
inline double bs_call_price(const MarketSlice& s, double sigma, double strike) {
    s.validate();
    detail::check_strike(strike);
    detail::check_vol(sigma);
    const double fwd_leg = s.spot * s.df_for();
    const double strike_leg = strike * s.df_dom();
    if (sigma == 0.0) return std::max(fwd_leg - strike_leg, 0.0);
    const double d1 = detail::d1(s, sigma, strike);
    const double d2 = d1 - sigma * std::sqrt(s.tau);
    return fwd_leg * norm_cdf(d1) - strike_leg * norm_cdf(d2);
}

inline double bs_put_price(const MarketSlice& s, double sigma, double strike) {
    s.validate();
    detail::check_strike(strike);
    detail::check_vol(sigma);
    const double fwd_leg = s.spot * s.df_for();
    const double strike_leg = strike * s.df_dom();
    if (sigma == 0.0) return std::max(strike_leg - fwd_leg, 0.0);
    const double d1 = detail::d1(s, sigma, strike);
    const double d2 = d1 - sigma * std::sqrt(s.tau);
    return strike_leg * norm_cdf(-d2) - fwd_leg * norm_cdf(-d1);
}

inline double bs_price(const MarketSlice& s, double sigma, double strike, OptionType type) {
    return type == OptionType::Call ? bs_call_price(s, sigma, strike) : bs_put_price(s, sigma, strike);
}

inline double bs_vega(const MarketSlice& s, double sigma, double strike) {
    s.validate();
    detail::check_strike(strike);
    if (!(sigma > 0.0)) return 0.0;
    return s.spot * s.df_for() * norm_pdf(detail::d1(s, sigma, strike)) * std::sqrt(s.tau);
}

/// Quoted delta: a signed value (positive for calls, negative for puts) or
/// the at-the-money marker.
class Delta {
public:
    static Delta atm() { return Delta(0.0, true); }
    static Delta of(double value) {
        if (!(std::abs(value) > 0.0 && std::abs(value) < 1.0))
            throw std::domain_error("delta must lie in (-1,0) or (0,1)");
        return Delta(value, false);
    }

    bool is_atm() const noexcept { return atm_; }
    double value() const noexcept { return atm_ ? 0.5 : value_; }
    OptionType type() const noexcept { return atm_ || value_ > 0.0 ? OptionType::Call : OptionType::Put; }

    friend bool operator==(const Delta&, const Delta&) = default;

private:
    Delta(double v, bool atm) : value_(v), atm_(atm) {}
    double value_;
    bool atm_;
};

enum class DeltaConvention {
    Spot,     ///< unadjusted spot delta e^{-r_f tau} N(d1)
    Forward,  ///< unadjusted forward delta N(d1)
};

enum class AtmConvention {
    DeltaNeutral,  ///< straddle with zero delta, K = F exp(sigma^2 tau / 2)
    Forward,       ///< K = F
};

struct DeltaQuoteConvention {
    DeltaConvention delta = DeltaConvention::Spot;
    AtmConvention atm = AtmConvention::DeltaNeutral;
};

/// Delta of a call or put at the given strike.
inline double strike_to_delta(const MarketSlice& s, double sigma, double strike, OptionType type,
                              DeltaConvention conv = DeltaConvention::Spot) {
    s.validate();
    detail::check_strike(strike);
    if (!(sigma > 0.0)) throw std::domain_error("strike_to_delta: volatility must be positive");
    const double scale = conv == DeltaConvention::Spot ? s.df_for() : 1.0;
    const double d1 = detail::d1(s, sigma, strike);
    return type == OptionType::Call ? scale * norm_cdf(d1) : -scale * norm_cdf(-d1);
}

inline double delta_to_strike(const MarketSlice& s, double sigma, Delta delta,
                              DeltaQuoteConvention conv = {}) {
    s.validate();
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::domain_error("delta_to_strike: volatility must be positive");
    const double sd = sigma * std::sqrt(s.tau);
    const double fwd = s.forward();
    if (delta.is_atm())
        return conv.atm == AtmConvention::DeltaNeutral ? fwd * std::exp(0.5 * sd * sd) : fwd;

    const double scale = conv.delta == DeltaConvention::Spot ? s.df_for() : 1.0;
    // N(d1) for calls, N(-d1) for puts
    const double p = std::abs(delta.value()) / scale;
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("delta_to_strike: delta not attainable under the discount factor");
    const double d1 = delta.type() == OptionType::Call ? norm_inv(p) : -norm_inv(p);
    return fwd * std::exp(-d1 * sd + 0.5 * sd * sd);
}

struct ImpliedVolConfig {
    double price_tolerance = 1e-12;  ///< relative to the target price
    int max_iterations = 100;
};

/// Implied volatility of a call price. Newton on the logarithm of the time
/// value (the out-of-the-money option price), safeguarded by a bisection
/// bracket; a price on the lower no-arbitrage edge returns 0.
inline double implied_vol(const MarketSlice& s, double strike, double price, ImpliedVolConfig cfg = {}) {
    s.validate();
    detail::check_strike(strike);
    const double lower = std::max(s.spot * s.df_for() - strike * s.df_dom(), 0.0);
    const double upper = s.spot * s.df_for();
    if (!std::isfinite(price) || price < lower || price >= upper)
        throw std::domain_error("implied_vol: price outside the no-arbitrage band");
    const double abs_tol = cfg.price_tolerance * std::max(price, std::numeric_limits<double>::min());
    const double target = price - lower;
    if (target <= abs_tol) return 0.0;

    const bool use_put = lower > 0.0;
    auto time_value = [&](double sigma) {
        return use_put ? bs_put_price(s, sigma, strike) : bs_call_price(s, sigma, strike);
    };

    double lo = 0.0;
    double hi = 1.0;
    while (time_value(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw std::domain_error("implied_vol: no volatility reproduces price");
    }

    // Starting point: inflection of the price in sigma.
    const double m = std::abs(std::log(s.forward() / strike));
    double sigma = std::sqrt(2.0 * m / s.tau);
    if (!(sigma > lo && sigma < hi)) sigma = 0.5 * (lo + hi);

    const double log_target = std::log(target);
    double best = sigma;
    double best_err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_iterations; ++it) {
        const double tv = time_value(sigma);
        const double err = std::abs(tv - target);
        if (err < best_err) {
            best_err = err;
            best = sigma;
        }
        if (tv == target) break;
        if (tv > target)
            hi = sigma;
        else
            lo = sigma;
        const double vega = bs_vega(s, sigma, strike);
        double next = 0.5 * (lo + hi);
        if (tv > 0.0 && vega > 0.0) {
            const double newton = sigma - (std::log(tv) - log_target) * tv / vega;
            if (newton > lo && newton < hi) next = newton;
        }
        const double step = std::abs(next - sigma);
        sigma = next;
        // keep iterating past the price tolerance until the step stalls
        if (step <= 4.0 * std::numeric_limits<double>::epsilon() * sigma) break;
        if (best_err <= abs_tol && step <= 1e-14 * sigma) break;
    }
    const double err = std::abs(time_value(sigma) - target);
    if (err < best_err) {
        best_err = err;
        best = sigma;
    }
    if (best_err <= abs_tol) return best;
    throw std::runtime_error("implied_vol: iteration limit reached");
}

}  // namespace pwh
