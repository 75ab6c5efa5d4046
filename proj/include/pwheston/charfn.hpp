#pragma once

// Characteristic functions of the log-spot for Black-Scholes and for the
// Heston model with piecewise constant coefficients.
//
// Both are written as f_j = exp(C_j + D_j v + i phi x); the factor
// exp(-r_f tau) sits inside C_j, so f_j(0) = exp(-r_f tau).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "heston_params.hpp"
#include "market.hpp"

namespace pwh {

using cplx = std::complex<double>;

/// Selects the share-measure (P1) or money-measure (P2) probability.
enum class ProbIndex { P1 = 1, P2 = 2 };

/// Coefficients of the Riccati equation
///   dD/dtau = N D^2 - M D + L,   dC/dtau = r i phi - r_f + a D
/// on one constant-parameter segment.
struct RiccatiCoefficients {
    cplx L;
    cplx M;
    double N;
    cplx A;  ///< principal sqrt(4 L N - M^2)
    double a;
    double b;
};

inline RiccatiCoefficients riccati_coefficients(const HestonSegment& seg, double phi, ProbIndex j) {
    const double u = j == ProbIndex::P1 ? 0.5 : -0.5;
    const double b = j == ProbIndex::P1 ? seg.kappa - seg.xi * seg.rho : seg.kappa;
    RiccatiCoefficients c;
    c.L = cplx(-0.5 * phi * phi, u * phi);
    c.M = cplx(b, -seg.xi * seg.rho * phi);
    c.N = 0.5 * seg.xi * seg.xi;
    c.A = std::sqrt(4.0 * c.L * c.N - c.M * c.M);
    c.a = seg.kappa * seg.theta;
    c.b = b;
    return c;
}

struct CFState {
    cplx C{0.0, 0.0};
    cplx D{0.0, 0.0};
};

/// Black-Scholes characteristic function exp(D_j(tau) + i phi ln S).
inline cplx bs_char_fn(const Market& m, double sigma, double tau, double phi, ProbIndex j) {
    if (!(tau >= 0.0)) throw std::domain_error("bs_char_fn: tau must be >= 0");
    const double var = sigma * sigma;
    const double drift = m.drift() + (j == ProbIndex::P1 ? 0.5 : -0.5) * var;
    const cplx D = cplx(-0.5 * var * phi * phi - m.r_for, drift * phi) * tau;
    return std::exp(D + cplx(0.0, phi * m.log_spot()));
}

namespace detail {

// Below this vol-of-vol the quadratic term is dropped and the linear ODE is
// solved exactly.
inline constexpr double kLinearLimitXi = 1e-6;

}  // namespace detail

/// Advances (C_j, D_j) from tau0 to tau on one segment.
///
/// Uses the exponential form of the Riccati solution. With D_-/D_+ the
/// roots of N D^2 - M D + L and d = sqrt(M^2 - 4 L N) (Re d >= 0),
///   w(s) = w0 exp(-d s),  w0 = (D0 - D_-) / (D0 - D_+),
///   D    = (D_- - w D_+) / (1 - w),
///   C    = C0 + (r i phi - r_f) s + a [D_- s - ln((1 - w) / (1 - w0)) / N].
/// The logarithm is taken along the path in s: while |w| <= 1 the argument
/// stays in the right half plane, and for |w0| > 1 the path is split where
/// |w| crosses the unit circle, the outer piece being written via 1/w.
inline CFState heston_cd_step(const HestonSegment& seg, double tau0, double tau, double phi, ProbIndex j,
                              const CFState& in, const Market& m) {
    if (!(tau >= tau0)) throw std::domain_error("heston_cd_step: tau < tau0");
    const double s = tau - tau0;
    if (s == 0.0) return in;

    const auto k = riccati_coefficients(seg, phi, j);
    const cplx drift(-m.r_for, m.drift() * phi);
    CFState out;

    if (seg.xi < detail::kLinearLimitXi) {
        const cplx d_inf = k.L / k.M;
        const cplx decay = std::exp(-k.M * s);
        out.D = d_inf + (in.D - d_inf) * decay;
        out.C = in.C + drift * s + k.a * (d_inf * s + (in.D - d_inf) * (1.0 - decay) / k.M);
        return out;
    }

    const cplx d = std::sqrt(k.M * k.M - 4.0 * k.L * k.N);
    const cplx d_minus = (k.M - d) / (2.0 * k.N);
    const cplx d_plus = (k.M + d) / (2.0 * k.N);
    const cplx num = in.D - d_minus;
    const cplx den = in.D - d_plus;

    cplx log_ratio;  // continuous ln(1 - w(s)) - ln(1 - w0)
    if (std::abs(num) <= std::abs(den)) {
        const cplx w0 = num / den;
        const cplx w = w0 * std::exp(-d * s);
        out.D = (d_minus - w * d_plus) / (1.0 - w);
        log_ratio = std::log(1.0 - w) - std::log(1.0 - w0);
    } else {
        // q = 1/w grows like exp(Re(d) s); |q| reaches 1 at s_cross.
        const cplx q0 = den / num;
        const double growth = d.real();
        const double s_cross =
            growth > 0.0 ? -std::log(std::abs(q0)) / growth : std::numeric_limits<double>::infinity();
        if (s <= s_cross) {
            const cplx q = q0 * std::exp(d * s);
            out.D = (d_minus * q - d_plus) / (q - 1.0);
            log_ratio = -d * s + std::log(1.0 - q) - std::log(1.0 - q0);
        } else {
            const cplx q_cross = q0 * std::exp(d * s_cross);
            const cplx w_cross = 1.0 / q_cross;
            const cplx w = w_cross * std::exp(-d * (s - s_cross));
            out.D = (d_minus - w * d_plus) / (1.0 - w);
            log_ratio = -d * s_cross + std::log(1.0 - q_cross) - std::log(1.0 - q0) + std::log(1.0 - w) -
                        std::log(1.0 - w_cross);
        }
    }
    out.C = in.C + drift * s + k.a * (d_minus * s - log_ratio / k.N);
    if (!std::isfinite(out.C.real()) || !std::isfinite(out.C.imag()) || !std::isfinite(out.D.real()) ||
        !std::isfinite(out.D.imag()))
        throw std::runtime_error("heston_cd_step: non-finite Riccati state");
    return out;
}

/// (C_j, D_j) at time-to-maturity T, integrating from the maturity backwards
/// through the calendar schedule.
inline CFState heston_cd(const PiecewiseHestonParams& p, const Market& m, double T, double phi, ProbIndex j) {
    if (!(T > 0.0)) throw std::domain_error("heston_char_fn: maturity must be positive");
    if (p.segments.empty() || T > p.horizon() * (1.0 + 1e-14))
        throw std::domain_error("heston_char_fn: maturity beyond parameter schedule");
    CFState state;
    double tau = 0.0;
    // Calendar segment [t_s, t_e) covers time-to-maturity [T - t_e, T - t_s).
    for (auto it = p.segments.rbegin(); it != p.segments.rend(); ++it) {
        if (it->t_start >= T) continue;
        const double tau_end = T - it->t_start;
        state = heston_cd_step(*it, tau, tau_end, phi, j, state, m);
        tau = tau_end;
    }
    return state;
}

/// Heston characteristic function exp(C_j + D_j v0 + i phi ln S).
inline cplx heston_char_fn(const PiecewiseHestonParams& p, const Market& m, double T, double phi, ProbIndex j) {
    const auto st = heston_cd(p, m, T, phi, j);
    return std::exp(st.C + st.D * p.v0 + cplx(0.0, phi * m.log_spot()));
}

}  // namespace pwh
