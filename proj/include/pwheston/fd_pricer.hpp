#pragma once

// Finite-difference solver for the piecewise Heston pricing PDE in
// (x = ln S, v), stepped backward in calendar time:
//
//   V_t + v/2 V_xx + rho xi v V_xv + xi^2/2 v V_vv + (r_d - r_f - v/2) V_x + kappa (theta - v) V_v - r_d V = 0.
//
// Douglas ADI with the mixed term explicit. Vanilla and knock-out values
// are stepped together; knock-ins follow from in-out parity.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "heston_params.hpp"
#include "instruments.hpp"
#include "market.hpp"

namespace pwh {

struct FDConfig {
    int x_nodes = 160;
    int v_nodes = 80;
    double steps_per_year = 730.0;
    int min_steps_per_interval = 4;
    double theta = 0.5;       ///< ADI weight
    int damping_steps = 2;    ///< fully implicit steps after each non-smooth restart
    double x_width_sd = 6.0;     ///< half width of the x-grid in terminal standard deviations
    double x_conc_width = 1.0;   ///< width of node clustering, in terminal standard deviations
    double x_conc_amp = 8.0;     ///< peak extra node density at spot, strike and barrier
    bool richardson = false;     ///< combine with a run on the doubled grid, (4 fine - coarse) / 3
    std::optional<double> s_min, s_max;  ///< explicit spot range overrides the automatic one
    std::optional<double> v_max;

    void validate() const {
        if (x_nodes < 8 || v_nodes < 6) throw std::invalid_argument("fd: grid too small");
        if (!(steps_per_year > 0.0) || min_steps_per_interval < 1) throw std::invalid_argument("fd: bad time stepping");
        if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("fd: theta must lie in [0,1]");
        if (damping_steps < 0) throw std::invalid_argument("fd: negative damping steps");
        if (!(x_width_sd > 0.0)) throw std::invalid_argument("fd: x width must be positive");
        if (s_min && s_max && !(*s_min > 0.0 && *s_min < *s_max)) throw std::invalid_argument("fd: bad spot range");
        if (v_max && !(*v_max > 0.0)) throw std::invalid_argument("fd: v_max must be positive");
    }

    FDConfig refined(int factor) const {
        FDConfig c = *this;
        c.x_nodes *= factor;
        c.v_nodes *= factor;
        c.steps_per_year *= factor;
        return c;
    }
};

struct FDGrid {
    std::vector<double> x, v, t;
};

struct FDResult {
    double price = 0.0;       ///< the requested contract
    double vanilla = 0.0;
    double knock_out = 0.0;   ///< equals vanilla when there is no barrier
    double min_knock_out = 0.0;     ///< smallest knock-out value over all nodes and time levels
    double max_out_excess = 0.0;    ///< largest knock-out minus vanilla over all nodes and time levels
    std::size_t time_steps = 0;
    std::vector<std::string> warnings;
};

namespace detail {

/// Nodes on [a, b] with density 1 + sum_c amp / (1 + ((x - c)/w)^2). Each
/// pinned point is made an exact node by anchoring its cumulative density to
/// the nearest node index and interpolating linearly between anchors, which
/// keeps neighbouring spacings smooth.
inline std::vector<double> concentrated_grid(double a, double b, int n, const std::vector<double>& centres, double w,
                                             double amp, std::vector<double> pins) {
    const int fine = 40000;
    std::vector<double> xs(fine + 1), cum(fine + 1, 0.0);
    auto density = [&](double x) {
        double g = 1.0;
        for (double c : centres) g += amp / (1.0 + std::pow((x - c) / w, 2));
        return g;
    };
    for (int k = 0; k <= fine; ++k) xs[k] = a + (b - a) * k / fine;
    for (int k = 1; k <= fine; ++k) cum[k] = cum[k - 1] + 0.5 * (density(xs[k - 1]) + density(xs[k])) * (xs[k] - xs[k - 1]);
    auto cum_at = [&](double x) {
        const double f = (x - a) / (b - a) * fine;
        const int k = std::clamp(static_cast<int>(f), 0, fine - 1);
        return cum[k] + (f - k) * (cum[k + 1] - cum[k]);
    };
    auto inverse = [&](double c) {
        const auto it = std::lower_bound(cum.begin(), cum.end(), c);
        const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - cum.begin()), 1, fine);
        const double f = (c - cum[k - 1]) / (cum[k] - cum[k - 1]);
        return xs[k - 1] + f * (xs[k] - xs[k - 1]);
    };

    // anchors (node index, cumulative density)
    std::vector<std::pair<double, double>> anchors{{0.0, 0.0}, {double(n - 1), cum[fine]}};
    std::sort(pins.begin(), pins.end());
    for (double p : pins) {
        if (!(p > a && p < b)) continue;
        const double c = cum_at(p);
        const double idx = std::clamp(std::round((n - 1) * c / cum[fine]), 1.0, double(n - 2));
        bool clash = false;
        for (const auto& an : anchors) clash = clash || an.first == idx;
        if (!clash) anchors.push_back({idx, c});
    }
    std::sort(anchors.begin(), anchors.end());
    std::vector<double> out(n);
    for (std::size_t s = 1; s < anchors.size(); ++s) {
        const auto [i0, c0] = anchors[s - 1];
        const auto [i1, c1] = anchors[s];
        for (int i = static_cast<int>(i0); i <= static_cast<int>(i1); ++i)
            out[i] = inverse(c0 + (c1 - c0) * (i - i0) / (i1 - i0));
    }
    out.front() = a;
    out.back() = b;
    for (std::size_t s = 1; s + 1 < anchors.size(); ++s)
        for (double p : pins)
            if (std::abs(cum_at(p) - anchors[s].second) == 0.0) out[static_cast<std::size_t>(anchors[s].first)] = p;
    return out;
}

inline std::vector<double> sinh_grid(double vmax, int n, double d, double pin) {
    std::vector<double> v(n);
    const double top = std::asinh(vmax / d);
    for (int j = 0; j < n; ++j) v[j] = d * std::sinh(top * j / (n - 1));
    int best = 1;
    for (int j = 1; j + 1 < n; ++j)
        if (std::abs(v[j] - pin) < std::abs(v[best] - pin)) best = j;
    if (pin > v[best - 1] && pin < v[best + 1]) v[best] = pin;
    return v;
}

inline std::vector<double> time_grid(std::vector<double> knots, double T, double steps_per_year, int min_steps) {
    knots.push_back(0.0);
    knots.push_back(T);
    std::sort(knots.begin(), knots.end());
    std::vector<double> k;
    for (double t : knots)
        if (t >= 0.0 && t <= T && (k.empty() || t - k.back() > 1e-12)) k.push_back(t);
    std::vector<double> grid{k.front()};
    for (std::size_t i = 1; i < k.size(); ++i) {
        const int n = std::max(min_steps, static_cast<int>(std::ceil((k[i] - k[i - 1]) * steps_per_year - 1e-9)));
        for (int s = 1; s < n; ++s) grid.push_back(k[i - 1] + (k[i] - k[i - 1]) * s / n);
        grid.push_back(k[i]);
    }
    return grid;
}

/// Three-point weights for first and second derivatives on a non-uniform grid.
struct Stencil {
    double d1[3] = {0, 0, 0};
    double d2[3] = {0, 0, 0};
};

inline std::vector<Stencil> stencils(const std::vector<double>& z) {
    std::vector<Stencil> s(z.size());
    for (std::size_t i = 1; i + 1 < z.size(); ++i) {
        const double hm = z[i] - z[i - 1], hp = z[i + 1] - z[i];
        s[i].d1[0] = -hp / (hm * (hm + hp));
        s[i].d1[1] = (hp - hm) / (hm * hp);
        s[i].d1[2] = hm / (hp * (hm + hp));
        s[i].d2[0] = 2.0 / (hm * (hm + hp));
        s[i].d2[1] = -2.0 / (hm * hp);
        s[i].d2[2] = 2.0 / (hp * (hm + hp));
    }
    return s;
}

/// Solves a tridiagonal system in place (Thomas algorithm); `d` holds the rhs.
inline void solve_tridiagonal(const std::vector<double>& lo, const std::vector<double>& di, const std::vector<double>& up,
                              std::vector<double>& d, std::vector<double>& scratch) {
    const std::size_t n = d.size();
    scratch.resize(n);
    double denom = di[0];
    scratch[0] = up[0] / denom;
    d[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = di[i] - lo[i] * scratch[i - 1];
        scratch[i] = up[i] / denom;
        d[i] = (d[i] - lo[i] * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= scratch[i] * d[i + 1];
}

class HestonADI {
public:
    HestonADI(const FDGrid& g, const Market& m) : g_(g), m_(m), sx_(stencils(g.x)), sv_(stencils(g.v)) {
        nx_ = g.x.size();
        nv_ = g.v.size();
        s_.resize(nx_);
        for (std::size_t i = 0; i < nx_; ++i) s_[i] = std::exp(g.x[i]);
    }

    std::size_t index(std::size_t i, std::size_t j) const { return i + nx_ * j; }

    void set_segment(const HestonSegment& seg) { seg_ = seg; }

    /// Holds the x-columns flagged in `mask` at `value` inside every stage of
    /// the following steps; an empty mask releases them.
    void set_fixed(std::vector<char> mask, double value) {
        fixed_ = std::move(mask);
        fixed_value_ = value;
    }

    /// One Douglas step of size dt on u (values at the later time on entry).
    void step(std::vector<double>& u, double dt, double theta) {
        const std::size_t n = u.size();
        a0_.assign(n, 0.0);
        a1_.assign(n, 0.0);
        a2_.assign(n, 0.0);
        apply_mixed(u, a0_);
        apply_x(u, a1_);
        apply_v(u, a2_);
        y_.resize(n);
        for (std::size_t k = 0; k < n; ++k) y_[k] = u[k] + dt * (a0_[k] + a1_[k] + a2_[k]);
        for (std::size_t k = 0; k < n; ++k) y_[k] -= theta * dt * a1_[k];
        enforce_fixed(y_);
        solve_x(y_, theta * dt);
        for (std::size_t k = 0; k < n; ++k) y_[k] -= theta * dt * a2_[k];
        enforce_fixed(y_);
        solve_v(y_, theta * dt);
        enforce_fixed(y_);
        u.swap(y_);
    }

private:
    bool is_fixed(std::size_t i) const { return !fixed_.empty() && fixed_[i]; }

    void enforce_fixed(std::vector<double>& y) const {
        if (fixed_.empty()) return;
        for (std::size_t i = 0; i < nx_; ++i)
            if (fixed_[i])
                for (std::size_t j = 0; j < nv_; ++j) y[index(i, j)] = fixed_value_;
    }

    double x_coeff_conv(std::size_t j) const { return m_.drift() - 0.5 * g_.v[j]; }

    // At the x ends V_SS = 0, which leaves the one-sided drift term (r_d - r_f) V_x.
    double end_coeff(std::size_t i) const {
        const double a = m_.drift();
        return i == 0 ? a / (g_.x[1] - g_.x[0]) : a / (g_.x[nx_ - 1] - g_.x[nx_ - 2]);
    }

    void apply_x(const std::vector<double>& u, std::vector<double>& out) const {
        const double half_r = 0.5 * m_.r_dom;
        for (std::size_t j = 0; j < nv_; ++j) {
            const std::size_t k0 = index(0, j), k1 = index(nx_ - 1, j);
            out[k0] = end_coeff(0) * (u[k0 + 1] - u[k0]) - half_r * u[k0];
            out[k1] = end_coeff(nx_ - 1) * (u[k1] - u[k1 - 1]) - half_r * u[k1];
            const double diff = 0.5 * g_.v[j], conv = x_coeff_conv(j);
            for (std::size_t i = 1; i + 1 < nx_; ++i) {
                const auto& s = sx_[i];
                const std::size_t k = index(i, j);
                double acc = -half_r * u[k];
                for (int q = 0; q < 3; ++q) acc += (diff * s.d2[q] + conv * s.d1[q]) * u[k + q - 1];
                out[k] = acc;
            }
        }
    }

    // v-direction row coefficients (lower, diag, upper) at level j
    void v_row(std::size_t j, double& lo, double& di, double& up) const {
        const double half_r = 0.5 * m_.r_dom;
        const double vj = g_.v[j];
        if (j == 0) {
            // degenerate boundary: only the inward drift kappa theta survives
            const double h = g_.v[1] - g_.v[0];
            const double c = seg_.kappa * seg_.theta / h;
            lo = 0.0;
            di = -c - half_r;
            up = c;
        } else if (j + 1 == nv_) {
            // V_v = 0 via a mirrored ghost node
            const double h = g_.v[j] - g_.v[j - 1];
            const double c = 0.5 * seg_.xi * seg_.xi * vj * 2.0 / (h * h);
            lo = c;
            di = -c - half_r;
            up = 0.0;
        } else {
            const auto& s = sv_[j];
            const double diff = 0.5 * seg_.xi * seg_.xi * vj, conv = seg_.kappa * (seg_.theta - vj);
            lo = diff * s.d2[0] + conv * s.d1[0];
            di = diff * s.d2[1] + conv * s.d1[1] - half_r;
            up = diff * s.d2[2] + conv * s.d1[2];
        }
    }

    void apply_v(const std::vector<double>& u, std::vector<double>& out) const {
        for (std::size_t j = 0; j < nv_; ++j) {
            double lo, di, up;
            v_row(j, lo, di, up);
            for (std::size_t i = 0; i < nx_; ++i) {
                const std::size_t k = index(i, j);
                double acc = di * u[k];
                if (j > 0) acc += lo * u[k - nx_];
                if (j + 1 < nv_) acc += up * u[k + nx_];
                out[k] = acc;
            }
        }
    }

    void apply_mixed(const std::vector<double>& u, std::vector<double>& out) const {
        const double c = seg_.rho * seg_.xi;
        if (c == 0.0) return;
        for (std::size_t j = 1; j + 1 < nv_; ++j) {
            const auto& tv = sv_[j];
            const double cj = c * g_.v[j];
            for (std::size_t i = 1; i + 1 < nx_; ++i) {
                const auto& tx = sx_[i];
                double acc = 0.0;
                for (int b = 0; b < 3; ++b)
                    for (int a = 0; a < 3; ++a) acc += tx.d1[a] * tv.d1[b] * u[index(i + a - 1, j + b - 1)];
                out[index(i, j)] = cj * acc;
            }
        }
    }

    void solve_x(std::vector<double>& y, double w) {
        lo_.assign(nx_, 0.0);
        di_.assign(nx_, 1.0);
        up_.assign(nx_, 0.0);
        rhs_.resize(nx_);
        const double half_r = 0.5 * m_.r_dom;
        const double c0 = end_coeff(0), c1 = end_coeff(nx_ - 1);
        di_[0] = 1.0 + w * (c0 + half_r);
        up_[0] = -w * c0;
        lo_[nx_ - 1] = w * c1;
        di_[nx_ - 1] = 1.0 - w * (c1 - half_r);
        if (is_fixed(0)) di_[0] = 1.0, up_[0] = 0.0;
        if (is_fixed(nx_ - 1)) di_[nx_ - 1] = 1.0, lo_[nx_ - 1] = 0.0;
        for (std::size_t j = 0; j < nv_; ++j) {
            const double diff = 0.5 * g_.v[j], conv = x_coeff_conv(j);
            for (std::size_t i = 1; i + 1 < nx_; ++i) {
                const auto& s = sx_[i];
                lo_[i] = -w * (diff * s.d2[0] + conv * s.d1[0]);
                di_[i] = 1.0 - w * (diff * s.d2[1] + conv * s.d1[1] - half_r);
                up_[i] = -w * (diff * s.d2[2] + conv * s.d1[2]);
                if (is_fixed(i)) {
                    lo_[i] = up_[i] = 0.0;
                    di_[i] = 1.0;
                }
            }
            for (std::size_t i = 0; i < nx_; ++i) rhs_[i] = y[index(i, j)];
            solve_tridiagonal(lo_, di_, up_, rhs_, scratch_);
            for (std::size_t i = 0; i < nx_; ++i) y[index(i, j)] = rhs_[i];
        }
    }

    void solve_v(std::vector<double>& y, double w) {
        lo_.assign(nv_, 0.0);
        di_.assign(nv_, 1.0);
        up_.assign(nv_, 0.0);
        for (std::size_t j = 0; j < nv_; ++j) {
            double lo, di, up;
            v_row(j, lo, di, up);
            lo_[j] = -w * lo;
            di_[j] = 1.0 - w * di;
            up_[j] = -w * up;
        }
        rhs_.resize(nv_);
        for (std::size_t i = 0; i < nx_; ++i) {
            if (is_fixed(i)) continue;
            for (std::size_t j = 0; j < nv_; ++j) rhs_[j] = y[index(i, j)];
            solve_tridiagonal(lo_, di_, up_, rhs_, scratch_);
            for (std::size_t j = 0; j < nv_; ++j) y[index(i, j)] = rhs_[j];
        }
    }

    const FDGrid& g_;
    Market m_;
    std::vector<Stencil> sx_, sv_;
    std::vector<double> s_;
    std::size_t nx_ = 0, nv_ = 0;
    HestonSegment seg_{};
    std::vector<char> fixed_;
    double fixed_value_ = 0.0;
    std::vector<double> a0_, a1_, a2_, y_, lo_, di_, up_, rhs_, scratch_;
};

inline double bilinear(const FDGrid& g, const std::vector<double>& u, double x, double v) {
    auto locate = [](const std::vector<double>& z, double p) {
        auto it = std::upper_bound(z.begin(), z.end(), p);
        std::size_t k = static_cast<std::size_t>(std::distance(z.begin(), it));
        k = std::clamp<std::size_t>(k, 1, z.size() - 1);
        return k - 1;
    };
    const std::size_t i = locate(g.x, x), j = locate(g.v, v);
    const double fx = (x - g.x[i]) / (g.x[i + 1] - g.x[i]);
    const double fv = (v - g.v[j]) / (g.v[j + 1] - g.v[j]);
    const std::size_t nx = g.x.size();
    auto at = [&](std::size_t a, std::size_t b) { return u[a + nx * b]; };
    return (1 - fx) * (1 - fv) * at(i, j) + fx * (1 - fv) * at(i + 1, j) + (1 - fx) * fv * at(i, j + 1) +
           fx * fv * at(i + 1, j + 1);
}

}  // namespace detail

/// Spatial and time grid for one contract.
inline FDGrid make_fd_grid(const PiecewiseHestonParams& p, const Market& m, const VanillaSpec& payoff,
                           const WindowBarrierSpec* barrier, const FDConfig& cfg) {
    const double T = payoff.maturity;
    double vbar = p.v0;
    for (const auto& s : p.segments) vbar = std::max(vbar, s.theta);
    const double sd = std::sqrt(vbar * T);
    const double x0 = m.log_spot();
    double lo = std::min(x0, std::log(payoff.strike)) - cfg.x_width_sd * sd;
    double hi = std::max(x0, std::log(payoff.strike)) + cfg.x_width_sd * sd;
    std::vector<double> centres{x0, std::log(payoff.strike)}, pins;
    if (barrier) {
        const double xb = std::log(barrier->barrier);
        centres.push_back(xb);
        pins.push_back(xb);
        lo = std::min(lo, xb - 0.5 * cfg.x_width_sd * sd);
        hi = std::max(hi, xb + 0.5 * cfg.x_width_sd * sd);
    }
    if (cfg.s_min) lo = std::log(*cfg.s_min);
    if (cfg.s_max) hi = std::log(*cfg.s_max);
    if (barrier) {
        const double xb = std::log(barrier->barrier);
        if (!(xb > lo && xb < hi)) throw std::domain_error("fd: barrier outside the spatial grid");
    }
    if (!(x0 > lo && x0 < hi)) throw std::domain_error("fd: spot outside the spatial grid");
    pins.push_back(x0);

    FDGrid g;
    g.x = detail::concentrated_grid(lo, hi, cfg.x_nodes, centres, cfg.x_conc_width * sd, cfg.x_conc_amp, pins);
    double theta_max = 0.0;
    for (const auto& s : p.segments) theta_max = std::max(theta_max, s.theta);
    const double vmax = cfg.v_max.value_or(std::max(0.25, 15.0 * std::max(p.v0, theta_max)));
    g.v = detail::sinh_grid(vmax, cfg.v_nodes, 0.5 * std::max(p.v0, theta_max), p.v0);

    std::vector<double> knots;
    for (const auto& s : p.segments)
        if (s.t_start < T) knots.push_back(s.t_start);
    if (barrier) {
        knots.push_back(barrier->window_start);
        knots.push_back(barrier->window_end);
    }
    g.t = detail::time_grid(knots, T, cfg.steps_per_year, cfg.min_steps_per_interval);
    return g;
}

namespace detail {

inline FDResult fd_solve_once(const PiecewiseHestonParams& params, const Market& m, const VanillaSpec& payoff,
                              const WindowBarrierSpec* barrier, const FDConfig& cfg) {
    cfg.validate();
    params.validate();
    m.validate();
    payoff.validate();
    if (barrier) barrier->validate();
    const double T = payoff.maturity;
    if (T > params.horizon() * (1.0 + 1e-14)) throw std::domain_error("fd: maturity beyond parameter schedule");
    const auto p = params.coalesced();
    const FDGrid g = make_fd_grid(p, m, payoff, barrier, cfg);

    FDResult res;
    if (cfg.theta < 0.5) res.warnings.push_back("ADI weight below 0.5: explicit mixed term may be unstable");
    const std::size_t nx = g.x.size(), nv = g.v.size();
    std::vector<double> vanilla(nx * nv), ko;
    for (std::size_t j = 0; j < nv; ++j)
        for (std::size_t i = 0; i < nx; ++i) vanilla[i + nx * j] = payoff_value(payoff, std::exp(g.x[i]));

    auto in_window = [&](double t) {
        return barrier && t >= barrier->window_start - 1e-12 && t <= barrier->window_end + 1e-12;
    };
    std::vector<char> knocked(nx, 0);
    if (barrier)
        for (std::size_t i = 0; i < nx; ++i) {
            // nodes within rounding of the barrier count as on it
            const double s = std::exp(g.x[i]);
            knocked[i] = barrier->side == BarrierSide::Upper ? s >= barrier->barrier * (1.0 - 1e-12)
                                                             : s <= barrier->barrier * (1.0 + 1e-12);
        }
    auto knock = [&](std::vector<double>& u) {
        for (std::size_t i = 0; i < nx; ++i)
            if (knocked[i])
                for (std::size_t j = 0; j < nv; ++j) u[i + nx * j] = barrier->rebate;
    };
    auto track = [&] {
        for (std::size_t k = 0; k < ko.size(); ++k) {
            res.min_knock_out = std::min(res.min_knock_out, ko[k]);
            res.max_out_excess = std::max(res.max_out_excess, ko[k] - vanilla[k]);
        }
    };
    if (barrier) {
        ko = vanilla;
        res.min_knock_out = ko.front();
        res.max_out_excess = -std::numeric_limits<double>::infinity();
        if (in_window(T)) knock(ko);
        track();
    }

    HestonADI vanilla_solver(g, m), ko_solver(g, m);
    int damp_vanilla = cfg.damping_steps, damp_ko = cfg.damping_steps;
    for (std::size_t n = g.t.size() - 1; n-- > 0;) {
        const double t0 = g.t[n], t1 = g.t[n + 1], dt = t1 - t0;
        const auto& seg = p.segment_at(0.5 * (t0 + t1));
        vanilla_solver.set_segment(seg);
        vanilla_solver.step(vanilla, dt, damp_vanilla > 0 ? 1.0 : cfg.theta);
        if (damp_vanilla > 0) --damp_vanilla;
        if (barrier) {
            // restart damping when the barrier switches on going backward
            if (in_window(t0) && !in_window(t1)) damp_ko = cfg.damping_steps;
            ko_solver.set_segment(seg);
            // inside the window the barrier is a Dirichlet boundary throughout the step
            if (in_window(t0) && in_window(t1))
                ko_solver.set_fixed(knocked, barrier->rebate);
            else
                ko_solver.set_fixed({}, 0.0);
            ko_solver.step(ko, dt, damp_ko > 0 ? 1.0 : cfg.theta);
            if (damp_ko > 0 && !(in_window(t0) && !in_window(t1))) --damp_ko;
            if (in_window(t0)) knock(ko);
            track();
        }
        ++res.time_steps;
    }

    const double x0 = m.log_spot();
    res.vanilla = bilinear(g, vanilla, x0, p.v0);
    res.knock_out = barrier ? bilinear(g, ko, x0, p.v0) : res.vanilla;
    if (!barrier)
        res.price = res.vanilla;
    else
        res.price = barrier->knock == KnockType::KnockOut ? res.knock_out : res.vanilla - res.knock_out;
    return res;
}

inline FDResult fd_solve(const PiecewiseHestonParams& params, const Market& m, const VanillaSpec& payoff,
                         const WindowBarrierSpec* barrier, const FDConfig& cfg) {
    if (!cfg.richardson) return fd_solve_once(params, m, payoff, barrier, cfg);
    FDConfig base = cfg;
    base.richardson = false;
    const auto coarse = fd_solve_once(params, m, payoff, barrier, base);
    auto fine = fd_solve_once(params, m, payoff, barrier, base.refined(2));
    auto extrapolate = [](double f, double c) { return (4.0 * f - c) / 3.0; };
    fine.price = extrapolate(fine.price, coarse.price);
    fine.vanilla = extrapolate(fine.vanilla, coarse.vanilla);
    fine.knock_out = extrapolate(fine.knock_out, coarse.knock_out);
    fine.time_steps += coarse.time_steps;
    return fine;
}

}  // namespace detail

inline FDResult fd_price_detail(const PiecewiseHestonParams& params, const Market& m, const WindowBarrierSpec& spec,
                                const FDConfig& cfg = {}) {
    return detail::fd_solve(params, m, spec.payoff, &spec, cfg);
}

/// Window barrier price by finite differences.
inline double fd_price(const PiecewiseHestonParams& params, const Market& m, const WindowBarrierSpec& spec,
                       const FDConfig& cfg = {}) {
    return fd_price_detail(params, m, spec, cfg).price;
}

inline double fd_price_vanilla(const PiecewiseHestonParams& params, const Market& m, const VanillaSpec& spec,
                               const FDConfig& cfg = {}) {
    return detail::fd_solve(params, m, spec, nullptr, cfg).price;
}

}  // namespace pwh
