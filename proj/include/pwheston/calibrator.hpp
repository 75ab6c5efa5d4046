#pragma once

// Two-stage calibration of the piecewise Heston model to delta-quoted smiles:
// a global single-segment fit with fixed kappa, then a bootstrap that fits
// one new segment per interval with earlier segments and v0 frozen.

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "analytic_pricer.hpp"
#include "black_scholes.hpp"
#include "heston_params.hpp"
#include "levenberg_marquardt.hpp"
#include "market.hpp"

namespace pwh {

struct DeltaQuote {
    Delta delta;
    double vol;  ///< quoted Black-Scholes implied vol
};

/// Smile quoted at one expiry; slice.tau is the tenor.
struct TenorQuotes {
    MarketSlice slice;
    std::vector<DeltaQuote> quotes;
};

struct QuoteSurface {
    std::vector<TenorQuotes> tenors;
    DeltaQuoteConvention convention{};

    std::size_t quote_count() const {
        std::size_t n = 0;
        for (const auto& t : tenors) n += t.quotes.size();
        return n;
    }

    void validate() const {
        if (tenors.empty()) throw std::invalid_argument("quote surface: no tenors");
        for (std::size_t i = 0; i < tenors.size(); ++i) {
            tenors[i].slice.validate();
            if (tenors[i].quotes.empty()) throw std::invalid_argument("quote surface: tenor without quotes");
            if (i > 0 && !(tenors[i].slice.tau > tenors[i - 1].slice.tau))
                throw std::invalid_argument("quote surface: tenors must be strictly increasing");
            if (tenors[i].slice.spot != tenors[0].slice.spot)
                throw std::invalid_argument("quote surface: all tenors must share one spot");
            for (const auto& q : tenors[i].quotes)
                if (!(q.vol > 0.0)) throw std::invalid_argument("quote surface: vols must be positive");
        }
    }
};

struct Bound {
    double lower, upper;
};

struct CalibrationBounds {
    Bound v0{1e-6, 1.0};
    Bound theta{0.0, 1.0};
    Bound kappa{1e-3, 6.0};
    Bound rho{-1.0, 1.0};
    Bound xi{1e-4, 5.0};

    void validate() const {
        for (const auto& b : {v0, theta, kappa, rho, xi})
            if (!(b.lower < b.upper)) throw std::invalid_argument("calibration bounds: lower must be below upper");
        if (!(kappa.lower > 0.0) || !(xi.lower > 0.0) || !(v0.lower > 0.0) || theta.lower < 0.0 ||
            rho.lower < -1.0 || rho.upper > 1.0)
            throw std::invalid_argument("calibration bounds: outside the model domain");
    }
};

enum class ResidualWeighting {
    Price,         ///< raw price differences
    VegaWeighted,  ///< price differences divided by Black-Scholes vega
    Vol,           ///< implied-vol differences
};

struct CalibrationConfig {
    ResidualWeighting weighting = ResidualWeighting::VegaWeighted;
    LMConfig lm{};
    QuadratureConfig quadrature{};
    double fixed_kappa = 1.5;  ///< global stage only
};

/// Model vs market for one quote.
struct QuoteResidual {
    double tenor;
    Delta delta;
    double strike;
    double market_price;
    double model_price;
    double market_vol;
    double model_vol;  ///< NaN if the model price has no implied vol
};

struct SegmentDiagnostics {
    double t_start, t_end;
    int iterations;
    double objective;
    bool converged;
    std::string status;
};

struct CalibrationResult {
    PiecewiseHestonParams params;
    std::vector<QuoteResidual> residuals;
    int iterations = 0;
    double objective = 0.0;  ///< sum of squared weighted residuals
    bool converged = false;
    std::vector<SegmentDiagnostics> segments;
};

/// Bounded <-> unbounded map x = lo + (hi - lo)(1 + sin u)/2.
struct SineTransform {
    Bound b;
    double to_bounded(double u) const {
        const double x = b.lower + 0.5 * (b.upper - b.lower) * (1.0 + std::sin(u));
        return std::clamp(x, b.lower, b.upper);
    }
    double to_free(double x) const {
        // keep a little distance from the edges where the map is flat
        const double s = std::clamp(2.0 * (x - b.lower) / (b.upper - b.lower) - 1.0, -1.0 + 1e-6, 1.0 - 1e-6);
        return std::asin(s);
    }
};

namespace detail {

struct MarketQuote {
    const MarketSlice* slice;
    Delta delta;
    double strike;
    double price;  ///< call price
    double vega;
    double vol;
};

/// Strikes from the quoted vols, prices as calls.
inline std::vector<MarketQuote> market_quotes(const QuoteSurface& s, double t_lo, double t_hi) {
    std::vector<MarketQuote> out;
    for (const auto& t : s.tenors) {
        if (!(t.slice.tau > t_lo && t.slice.tau <= t_hi * (1.0 + 1e-12))) continue;
        for (const auto& q : t.quotes) {
            const double k = delta_to_strike(t.slice, q.vol, q.delta, s.convention);
            out.push_back({&t.slice, q.delta, k, bs_call_price(t.slice, q.vol, k), bs_vega(t.slice, q.vol, k), q.vol});
        }
    }
    return out;
}

inline double model_vol_or_nan(const MarketSlice& s, double k, double price) {
    try {
        return implied_vol(s, k, price);
    } catch (const std::exception&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

inline Eigen::VectorXd weighted_residuals(const PiecewiseHestonParams& p, const std::vector<MarketQuote>& quotes,
                                          const CalibrationConfig& cfg) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(quotes.size()));
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        const auto& q = quotes[i];
        double model;
        try {
            model = heston_call_cv(p, *q.slice, q.slice->tau, q.strike, cfg.quadrature);
        } catch (const std::exception&) {
            model = std::numeric_limits<double>::quiet_NaN();
        }
        switch (cfg.weighting) {
            case ResidualWeighting::Price: r[i] = model - q.price; break;
            case ResidualWeighting::VegaWeighted: r[i] = (model - q.price) / q.vega; break;
            case ResidualWeighting::Vol: r[i] = model_vol_or_nan(*q.slice, q.strike, model) - q.vol; break;
        }
    }
    return r;
}

inline std::vector<QuoteResidual> quote_residuals(const PiecewiseHestonParams& p, const QuoteSurface& s,
                                                  const CalibrationConfig& cfg) {
    std::vector<QuoteResidual> out;
    for (const auto& q : market_quotes(s, -1.0, p.horizon())) {
        const double model = heston_call_cv(p, *q.slice, q.slice->tau, q.strike, cfg.quadrature);
        out.push_back({q.slice->tau, q.delta, q.strike, q.price, model, q.vol, model_vol_or_nan(*q.slice, q.strike, model)});
    }
    return out;
}

}  // namespace detail

/// Starting point of the global stage.
struct GlobalFitStart {
    std::optional<double> v0, theta;  ///< default: squared ATM vols of first and last tenor
    double rho = -0.3;
    double xi = 0.3;
};

/// Single segment over [0, T_N] with kappa fixed; fits (v0, theta, rho, xi).
inline CalibrationResult global_fit(const QuoteSurface& surface, const CalibrationBounds& bounds = {},
                                    const CalibrationConfig& cfg = {}, const GlobalFitStart& start = {}) {
    surface.validate();
    bounds.validate();
    if (surface.quote_count() < 4) throw std::invalid_argument("global_fit: need at least 4 quotes");
    if (!(cfg.fixed_kappa >= bounds.kappa.lower && cfg.fixed_kappa <= bounds.kappa.upper))
        throw std::invalid_argument("global_fit: fixed kappa outside its bounds");
    const double horizon = surface.tenors.back().slice.tau;
    const auto quotes = detail::market_quotes(surface, -1.0, horizon);

    auto atm_var = [](const TenorQuotes& t) {
        for (const auto& q : t.quotes)
            if (q.delta.is_atm()) return q.vol * q.vol;
        return t.quotes.front().vol * t.quotes.front().vol;
    };
    const SineTransform tv0{bounds.v0}, ttheta{bounds.theta}, trho{bounds.rho}, txi{bounds.xi};
    auto unpack = [&](const Eigen::VectorXd& u) {
        return PiecewiseHestonParams::constant(tv0.to_bounded(u[0]), cfg.fixed_kappa, ttheta.to_bounded(u[1]),
                                               trho.to_bounded(u[2]), txi.to_bounded(u[3]), horizon);
    };
    Eigen::VectorXd u0(4);
    u0 << tv0.to_free(start.v0.value_or(atm_var(surface.tenors.front()))),
        ttheta.to_free(start.theta.value_or(atm_var(surface.tenors.back()))), trho.to_free(start.rho),
        txi.to_free(start.xi);

    const auto lm = levenberg_marquardt(
        [&](const Eigen::VectorXd& u) { return detail::weighted_residuals(unpack(u), quotes, cfg); }, u0, cfg.lm);

    CalibrationResult out;
    out.params = unpack(lm.x);
    out.iterations = lm.iterations;
    out.objective = lm.objective;
    out.converged = lm.converged();
    out.segments.push_back({0.0, horizon, lm.iterations, lm.objective, lm.converged(), to_string(lm.status)});
    out.residuals = detail::quote_residuals(out.params, surface, cfg);
    return out;
}

/// Fits one segment per interval (b_{k-1}, b_k] against the quotes with
/// tenors in that interval, shortest first. v0 stays at the global value,
/// each fit starts from the global segment's coefficients.
inline CalibrationResult bootstrap_fit(const QuoteSurface& surface, const CalibrationResult& global,
                                       const std::vector<double>& boundaries, const CalibrationBounds& bounds = {},
                                       const CalibrationConfig& cfg = {}) {
    surface.validate();
    bounds.validate();
    global.params.validate();
    if (boundaries.empty()) throw std::invalid_argument("bootstrap_fit: no interval boundaries");
    for (std::size_t k = 0; k < boundaries.size(); ++k) {
        if (!(boundaries[k] > (k ? boundaries[k - 1] : 0.0)))
            throw std::invalid_argument("bootstrap_fit: boundaries must be positive and increasing");
        bool aligned = false;
        for (const auto& t : surface.tenors) aligned = aligned || std::abs(t.slice.tau - boundaries[k]) <= 1e-12;
        if (!aligned)
            throw std::invalid_argument("bootstrap_fit: boundary " + std::to_string(boundaries[k]) +
                                        " is not a quoted tenor");
    }

    const auto& g = global.params.segments.front();
    const SineTransform ttheta{bounds.theta}, tkappa{bounds.kappa}, trho{bounds.rho}, txi{bounds.xi};
    CalibrationResult out;
    out.params.v0 = global.params.v0;
    out.converged = true;
    double t_lo = 0.0;
    for (double t_hi : boundaries) {
        const auto quotes = detail::market_quotes(surface, t_lo, t_hi);
        auto unpack = [&](const Eigen::VectorXd& u) {
            PiecewiseHestonParams p = out.params;
            p.segments.push_back({t_lo, t_hi, tkappa.to_bounded(u[1]), ttheta.to_bounded(u[0]), trho.to_bounded(u[2]),
                                  txi.to_bounded(u[3])});
            return p;
        };
        Eigen::VectorXd u0(4);
        u0 << ttheta.to_free(g.theta), tkappa.to_free(g.kappa), trho.to_free(g.rho), txi.to_free(g.xi);
        const auto lm = levenberg_marquardt(
            [&](const Eigen::VectorXd& u) { return detail::weighted_residuals(unpack(u), quotes, cfg); }, u0, cfg.lm);
        out.params = unpack(lm.x);
        out.iterations += lm.iterations;
        out.objective += lm.objective;
        out.converged = out.converged && lm.converged();
        out.segments.push_back({t_lo, t_hi, lm.iterations, lm.objective, lm.converged(), to_string(lm.status)});
        t_lo = t_hi;
    }
    out.residuals = detail::quote_residuals(out.params, surface, cfg);
    return out;
}

/// Surface of quotes implied by a model, for round-trip tests and synthetic data.
inline QuoteSurface synthetic_surface(const PiecewiseHestonParams& p, const Market& m, const std::vector<double>& tenors,
                                      const std::vector<Delta>& deltas = standard_deltas(), const SmileConfig& cfg = {}) {
    QuoteSurface s;
    s.convention = cfg.convention;
    for (double T : tenors) {
        TenorQuotes t{MarketSlice(m, T), {}};
        for (const auto& pt : price_smile(p, m, T, deltas, cfg)) t.quotes.push_back({pt.delta, pt.implied_vol});
        s.tenors.push_back(std::move(t));
    }
    return s;
}

}  // namespace pwh
