#pragma once

// Adaptive 7-15 Gauss-Kronrod integration on [0, inf) by panel doubling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwh {

struct QuadratureConfig {
    double abs_tolerance = 1e-10;
    double rel_tolerance = 1e-9;
    double phi_max = 200.0;   ///< initial truncation point
    int max_bisections = 50;  ///< per adaptive pass
    int max_doublings = 30;

    void validate() const {
        if (!(abs_tolerance > 0.0) || !(rel_tolerance > 0.0))
            throw std::invalid_argument("quadrature: tolerances must be positive");
        if (!(phi_max > 0.0)) throw std::invalid_argument("quadrature: phi_max must be positive");
        if (max_bisections < 0 || max_doublings < 0)
            throw std::invalid_argument("quadrature: negative iteration budget");
    }
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
    int bisections = 0;
    double upper_limit = 0.0;  ///< final truncation point
};

/// Thrown when the bisection budget runs out; carries the best estimate.
class AccuracyError : public std::runtime_error {
public:
    AccuracyError(const std::string& what, QuadratureResult best)
        : std::runtime_error(what), best_(best) {}
    const QuadratureResult& best() const noexcept { return best_; }

private:
    QuadratureResult best_;
};

namespace gk15 {

// Kronrod abscissae on [-1,1] (non-negative half, descending); odd indices
// are the 7-point Gauss nodes.
inline constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a = 0.0;
    double b = 0.0;
    double kronrod = 0.0;
    double gauss = 0.0;
    double error = 0.0;
    double abs_integral = 0.0;  ///< Kronrod estimate of the integral of |f|
};

/// One 15-point panel. The error estimate is the QUADPACK scaling of
/// |K15 - G7| by the integral of |f - mean|.
template <class F>
Panel apply(F&& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    std::array<double, 15> fv{};
    fv[7] = f(center);
    for (std::size_t i = 0; i < 7; ++i) {
        const double dx = half * kNodes[i];
        fv[i] = f(center - dx);
        fv[14 - i] = f(center + dx);
    }
    double resk = kKronrodWeights[7] * fv[7];
    double resg = kGaussWeights[3] * fv[7];
    double resabs = std::abs(resk);
    for (std::size_t i = 0; i < 7; ++i) {
        const double pair = fv[i] + fv[14 - i];
        resk += kKronrodWeights[i] * pair;
        resabs += kKronrodWeights[i] * (std::abs(fv[i]) + std::abs(fv[14 - i]));
        if (i % 2 == 1) resg += kGaussWeights[i / 2] * pair;
    }
    const double mean = 0.5 * resk;
    double resasc = kKronrodWeights[7] * std::abs(fv[7] - mean);
    for (std::size_t i = 0; i < 7; ++i)
        resasc += kKronrodWeights[i] * (std::abs(fv[i] - mean) + std::abs(fv[14 - i] - mean));

    Panel p{a, b, resk * half, resg * half, 0.0, resabs * half};
    resasc *= half;
    double err = std::abs(p.kronrod - p.gauss);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr double uflow = std::numeric_limits<double>::min();
    if (p.abs_integral > uflow / (50.0 * eps)) err = std::max(50.0 * eps * p.abs_integral, err);
    p.error = err;
    return p;
}

}  // namespace gk15

namespace detail {

struct AdaptiveOutcome {
    std::vector<gk15::Panel> panels;  ///< sorted by position
    double value = 0.0;
    double error = 0.0;
    double abs_integral = 0.0;
    int bisections = 0;
    bool converged = false;
};

template <class F>
AdaptiveOutcome adaptive_gk(F&& f, double a, double b, double abs_tol, double rel_tol, int max_bisections) {
    AdaptiveOutcome out;
    out.panels.push_back(gk15::apply(f, a, b));
    auto totals = [&out] {
        // Position order keeps the summation deterministic.
        std::sort(out.panels.begin(), out.panels.end(),
                  [](const gk15::Panel& l, const gk15::Panel& r) { return l.a < r.a; });
        out.value = out.error = out.abs_integral = 0.0;
        for (const auto& p : out.panels) {
            out.value += p.kronrod;
            out.error += p.error;
            out.abs_integral += p.abs_integral;
        }
    };
    totals();
    while (out.error > std::max(abs_tol, rel_tol * std::abs(out.value))) {
        if (out.bisections >= max_bisections) return out;
        auto worst = std::max_element(out.panels.begin(), out.panels.end(),
                                      [](const gk15::Panel& l, const gk15::Panel& r) { return l.error < r.error; });
        const double mid = 0.5 * (worst->a + worst->b);
        const double lo = worst->a, hi = worst->b;
        *worst = gk15::apply(f, lo, mid);
        out.panels.push_back(gk15::apply(f, mid, hi));
        ++out.bisections;
        totals();
    }
    out.converged = true;
    return out;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod on a finite interval.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureConfig& cfg = {}) {
    cfg.validate();
    std::size_t evals = 0;
    auto counted = [&](double x) {
        ++evals;
        return f(x);
    };
    auto r = detail::adaptive_gk(counted, a, b, cfg.abs_tolerance, cfg.rel_tolerance, cfg.max_bisections);
    QuadratureResult res{r.value, r.error, evals, r.bisections, b};
    if (!r.converged) throw AccuracyError("integrate: bisection budget exhausted", res);
    return res;
}

/// Integral of f over (0, inf). [0, phi_max] is integrated adaptively, then
/// panels [phi_max, 2 phi_max], [2 phi_max, 4 phi_max], ... are added until
/// the integral of |f| over the newest panel is below tolerance. Nodes never
/// touch phi = 0.
template <class F>
QuadratureResult integrate_semi_infinite(F&& f, const QuadratureConfig& cfg = {}) {
    cfg.validate();
    std::size_t evals = 0;
    auto counted = [&](double x) {
        ++evals;
        return f(x);
    };
    QuadratureResult res;
    double lo = 0.0;
    double hi = cfg.phi_max;
    double budget_share = 0.5;
    for (int doubling = 0;; ++doubling) {
        const double tol = std::max(cfg.abs_tolerance, cfg.rel_tolerance * std::abs(res.value));
        auto r = detail::adaptive_gk(counted, lo, hi, budget_share * tol, budget_share * cfg.rel_tolerance,
                                     cfg.max_bisections);
        res.value += r.value;
        res.error += r.error;
        res.bisections += r.bisections;
        res.evaluations = evals;
        res.upper_limit = hi;
        if (!r.converged) throw AccuracyError("integrate_semi_infinite: bisection budget exhausted", res);
        const double total_tol = std::max(cfg.abs_tolerance, cfg.rel_tolerance * std::abs(res.value));
        if (doubling > 0 && r.abs_integral < budget_share * total_tol) break;
        if (doubling >= cfg.max_doublings)
            throw AccuracyError("integrate_semi_infinite: integrand does not decay", res);
        budget_share *= 0.5;
        lo = hi;
        hi *= 2.0;
    }
    return res;
}

}  // namespace pwh
