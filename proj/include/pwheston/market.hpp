#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pwh {

/// Spot and continuously compounded rates of one currency pair.
struct Market {
    double spot = 1.0;   ///< units of domestic currency per unit of foreign
    double r_dom = 0.0;  ///< domestic rate
    double r_for = 0.0;  ///< foreign rate

    double drift() const noexcept { return r_dom - r_for; }
    double log_spot() const { return std::log(spot); }

    void validate() const {
        if (!(spot > 0.0) || !std::isfinite(spot))
            throw std::domain_error("market: spot must be positive and finite");
        if (!std::isfinite(r_dom) || !std::isfinite(r_for))
            throw std::domain_error("market: rates must be finite");
    }
};

/// Market data for a single expiry.
struct MarketSlice : Market {
    double tau = 1.0;  ///< year fraction to expiry

    MarketSlice() = default;
    MarketSlice(double s, double rd, double rf, double t) : Market{s, rd, rf}, tau(t) {}
    MarketSlice(const Market& m, double t) : Market(m), tau(t) {}

    double df_dom() const { return std::exp(-r_dom * tau); }
    double df_for() const { return std::exp(-r_for * tau); }
    double forward() const { return spot * std::exp(drift() * tau); }

    void validate() const {
        Market::validate();
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw std::domain_error("market slice: maturity must be positive");
    }
};

}  // namespace pwh
