#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwh {

/// Heston coefficients held constant on the calendar interval [t_start, t_end).
struct HestonSegment {
    double t_start = 0.0;
    double t_end = 1.0;
    double kappa = 1.0;  ///< mean-reversion speed
    double theta = 0.01; ///< long-term variance
    double rho = 0.0;    ///< spot/variance correlation
    double xi = 0.1;     ///< volatility of variance

    void validate() const {
        if (!(t_start >= 0.0) || !(t_end > t_start))
            throw std::domain_error("heston segment: need 0 <= t_start < t_end");
        if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::domain_error("heston segment: kappa must be > 0");
        if (!(theta >= 0.0) || !std::isfinite(theta)) throw std::domain_error("heston segment: theta must be >= 0");
        if (!(rho >= -1.0 && rho <= 1.0)) throw std::domain_error("heston segment: rho must lie in [-1,1]");
        if (!(xi > 0.0) || !std::isfinite(xi)) throw std::domain_error("heston segment: xi must be > 0");
    }

    bool same_coefficients(const HestonSegment& o) const noexcept {
        return kappa == o.kappa && theta == o.theta && rho == o.rho && xi == o.xi;
    }
};

/// Heston model with a global initial variance and a contiguous schedule of
/// piecewise constant coefficients starting at t = 0.
struct PiecewiseHestonParams {
    double v0 = 0.01;
    std::vector<HestonSegment> segments;

    static PiecewiseHestonParams constant(double v0, double kappa, double theta, double rho, double xi,
                                          double horizon) {
        return {v0, {HestonSegment{0.0, horizon, kappa, theta, rho, xi}}};
    }

    double horizon() const { return segments.empty() ? 0.0 : segments.back().t_end; }

    void validate() const {
        if (!(v0 > 0.0) || !std::isfinite(v0)) throw std::domain_error("heston params: v0 must be > 0");
        if (segments.empty()) throw std::domain_error("heston params: empty schedule");
        if (segments.front().t_start != 0.0)
            throw std::domain_error("heston params: schedule must start at t = 0");
        for (std::size_t i = 0; i < segments.size(); ++i) {
            segments[i].validate();
            if (i > 0 && segments[i].t_start != segments[i - 1].t_end)
                throw std::domain_error("heston params: segments are not contiguous at index " +
                                        std::to_string(i));
        }
    }

    /// Segment whose interval contains t; t == horizon maps to the last one.
    const HestonSegment& segment_at(double t) const {
        for (const auto& s : segments)
            if (t < s.t_end) return s;
        if (!segments.empty() && t <= segments.back().t_end) return segments.back();
        throw std::domain_error("heston params: time beyond schedule");
    }

    /// Copy with neighbouring identical-coefficient segments merged.
    PiecewiseHestonParams coalesced() const {
        PiecewiseHestonParams out{v0, {}};
        for (const auto& s : segments) {
            if (!out.segments.empty() && out.segments.back().same_coefficients(s))
                out.segments.back().t_end = s.t_end;
            else
                out.segments.push_back(s);
        }
        return out;
    }

    /// Copy with segment `index` split at time t into two identical pieces.
    PiecewiseHestonParams split_at(std::size_t index, double t) const {
        const auto& s = segments.at(index);
        if (!(t > s.t_start && t < s.t_end)) throw std::domain_error("split_at: time outside segment");
        PiecewiseHestonParams out = *this;
        HestonSegment left = s, right = s;
        left.t_end = t;
        right.t_start = t;
        out.segments[index] = left;
        out.segments.insert(out.segments.begin() + static_cast<std::ptrdiff_t>(index) + 1, right);
        return out;
    }
};

}  // namespace pwh
