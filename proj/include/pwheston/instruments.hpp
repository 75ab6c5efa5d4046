#pragma once

#include <stdexcept>
#include <variant>

#include "black_scholes.hpp"

namespace pwh {

struct VanillaSpec {
    OptionType type = OptionType::Call;
    double strike = 1.0;
    double maturity = 1.0;
    double notional = 1.0;

    void validate() const {
        if (!(strike > 0.0)) throw std::domain_error("vanilla: strike must be positive");
        if (!(maturity > 0.0)) throw std::domain_error("vanilla: maturity must be positive");
    }
};

/// Forward contract paying S_T - K; used for martingale checks.
struct ForwardSpec {
    double strike = 0.0;
    double maturity = 1.0;

    void validate() const {
        if (!(maturity > 0.0)) throw std::domain_error("forward: maturity must be positive");
    }
};

enum class BarrierSide { Lower, Upper };
enum class KnockType { KnockIn, KnockOut };

/// Barrier option whose trigger is monitored only on [window_start, window_end].
struct WindowBarrierSpec {
    double barrier = 1.0;
    BarrierSide side = BarrierSide::Lower;
    KnockType knock = KnockType::KnockOut;
    double window_start = 0.0;
    double window_end = 1.0;
    VanillaSpec payoff{};
    double rebate = 0.0;  ///< knock-out only, paid when the barrier is hit

    double maturity() const { return payoff.maturity; }

    void validate() const {
        payoff.validate();
        if (!(barrier > 0.0)) throw std::domain_error("window barrier: barrier must be positive");
        if (!(window_start >= 0.0 && window_start < window_end))
            throw std::domain_error("window barrier: need 0 <= window start < window end");
        if (window_end > payoff.maturity * (1.0 + 1e-14))
            throw std::domain_error("window barrier: window ends after maturity");
        if (knock == KnockType::KnockIn && rebate != 0.0)
            throw std::domain_error("window barrier: rebates are only supported on knock-out contracts");
    }

    /// Whether spot level s is on or beyond the barrier.
    bool breached(double s) const { return side == BarrierSide::Upper ? s >= barrier : s <= barrier; }

    WindowBarrierSpec with_knock(KnockType k) const {
        auto out = *this;
        out.knock = k;
        return out;
    }
};

using InstrumentSpec = std::variant<VanillaSpec, ForwardSpec, WindowBarrierSpec>;

inline double instrument_maturity(const InstrumentSpec& spec) {
    return std::visit(
        [](const auto& s) {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, WindowBarrierSpec>)
                return s.maturity();
            else
                return s.maturity;
        },
        spec);
}

inline double payoff_value(const VanillaSpec& v, double spot) {
    const double intrinsic = v.type == OptionType::Call ? spot - v.strike : v.strike - spot;
    return v.notional * (intrinsic > 0.0 ? intrinsic : 0.0);
}

}  // namespace pwh
