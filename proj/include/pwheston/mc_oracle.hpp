#pragma once

// Monte Carlo simulation of the piecewise Heston SDE
//
//   dx = (r_d - r_f - v/2) dt + sqrt(v) dW^x,   dv = kappa (theta - v) dt + xi sqrt(v) dW^v,
//
// Euler with full truncation (v^+ inside drift and diffusion). Paths are
// split into fixed chunks, each driven by its own generator seeded from
// (seed, chunk index), so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "heston_params.hpp"
#include "instruments.hpp"
#include "market.hpp"

namespace pwh {

struct MCConfig {
    std::uint64_t paths = 100'000;
    double steps_per_year = 365.0;
    std::uint64_t seed = 1;
    bool brownian_bridge = false;  ///< crossing probability between monitoring dates
    std::uint64_t chunk_size = 8192;
    unsigned threads = 0;  ///< 0 = hardware concurrency

    void validate() const {
        if (paths < 1) throw std::invalid_argument("mc: need at least one path");
        if (!(steps_per_year >= 1.0)) throw std::invalid_argument("mc: steps per year must be >= 1");
        if (chunk_size < 1) throw std::invalid_argument("mc: chunk size must be >= 1");
    }
};

struct MCResult {
    double price = 0.0;
    double std_error = 0.0;
    std::uint64_t paths = 0;
    std::size_t steps = 0;
};

namespace detail {

/// Simulation dates: forced points plus uniform fill between them.
inline std::vector<double> mc_time_grid(std::vector<double> forced, double T, double steps_per_year) {
    forced.push_back(0.0);
    forced.push_back(T);
    std::sort(forced.begin(), forced.end());
    std::vector<double> knots;
    for (double t : forced)
        if (t >= 0.0 && t <= T && (knots.empty() || t - knots.back() > 1e-12)) knots.push_back(t);
    std::vector<double> grid{knots.front()};
    for (std::size_t i = 1; i < knots.size(); ++i) {
        const double a = knots[i - 1], b = knots[i];
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) * steps_per_year - 1e-9)));
        for (std::size_t k = 1; k < n; ++k) grid.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(n));
        grid.push_back(b);
    }
    return grid;
}

struct StepCoeffs {
    double dt, sqdt, kappa, theta, xi, rho, rho_c;
    bool in_window;  ///< both ends inside the barrier window
};

struct ChunkSums {
    double sum = 0.0, sum_sq = 0.0;
};

}  // namespace detail

namespace detail {

/// Simulates cfg.paths paths to maturity T and hands each path's terminal
/// log-spot and barrier state to `value(x_T, hit, hit_time, out)`, which
/// writes `nvals` discounted values. Returns mean and standard error per value.
template <class PathValue>
std::vector<MCResult> mc_simulate(const PiecewiseHestonParams& params, const Market& m, double T,
                                  const WindowBarrierSpec* barrier, const MCConfig& cfg, std::size_t nvals,
                                  PathValue&& value) {
    cfg.validate();
    params.validate();
    m.validate();
    if (T > params.horizon() * (1.0 + 1e-14)) throw std::domain_error("mc: maturity beyond parameter schedule");
    const auto p = params.coalesced();

    std::vector<double> forced;
    for (const auto& s : p.segments)
        if (s.t_start < T) forced.push_back(s.t_start);
    if (barrier) {
        forced.push_back(barrier->window_start);
        forced.push_back(barrier->window_end);
    }
    const auto grid = mc_time_grid(forced, T, cfg.steps_per_year);
    const std::size_t nsteps = grid.size() - 1;

    std::vector<StepCoeffs> steps(nsteps);
    std::vector<char> monitored(grid.size(), 0);
    for (std::size_t k = 0; k < nsteps; ++k) {
        const double t0 = grid[k], t1 = grid[k + 1];
        const auto& seg = p.segment_at(0.5 * (t0 + t1));
        const double dt = t1 - t0;
        steps[k] = {dt, std::sqrt(dt), seg.kappa, seg.theta, seg.xi, seg.rho, std::sqrt(1.0 - seg.rho * seg.rho),
                    barrier && t0 >= barrier->window_start - 1e-12 && t1 <= barrier->window_end + 1e-12};
    }
    if (barrier)
        for (std::size_t k = 0; k < grid.size(); ++k)
            monitored[k] = grid[k] >= barrier->window_start - 1e-12 && grid[k] <= barrier->window_end + 1e-12;

    const double drift = m.drift();
    const double x0 = m.log_spot();
    const double log_b = barrier ? std::log(barrier->barrier) : 0.0;
    const bool upper = barrier && barrier->side == BarrierSide::Upper;
    auto crossed = [&](double lx) { return upper ? lx >= log_b : lx <= log_b; };

    const std::uint64_t nchunks = (cfg.paths + cfg.chunk_size - 1) / cfg.chunk_size;
    std::vector<ChunkSums> sums(nchunks * nvals);

    auto run_chunk = [&](std::uint64_t c) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
        boost::random::mt19937_64 rng(seq);
        boost::random::normal_distribution<double> normal;
        boost::random::uniform_01<double> uniform;
        const std::uint64_t count = std::min(cfg.chunk_size, cfg.paths - c * cfg.chunk_size);
        std::vector<double> out(nvals);
        ChunkSums* acc = &sums[c * nvals];
        for (std::uint64_t i = 0; i < count; ++i) {
            double x = x0, v = p.v0;
            bool hit = barrier && monitored[0] && crossed(x);
            double hit_time = 0.0;
            for (std::size_t k = 0; k < nsteps; ++k) {
                const auto& s = steps[k];
                const double vp = v > 0.0 ? v : 0.0;
                const double sv = std::sqrt(vp) * s.sqdt;
                const double zv = normal(rng);
                const double zx = s.rho * zv + s.rho_c * normal(rng);
                const double x_prev = x;
                x += (drift - 0.5 * vp) * s.dt + sv * zx;
                v += s.kappa * (s.theta - vp) * s.dt + s.xi * sv * zv;
                if (barrier && !hit) {
                    if (monitored[k + 1] && crossed(x)) {
                        hit = true;
                    } else if (cfg.brownian_bridge && s.in_window && vp > 0.0) {
                        const double a = log_b - x_prev, b = log_b - x;
                        if (uniform(rng) < std::exp(-2.0 * a * b / (vp * s.dt))) hit = true;
                    }
                    if (hit) hit_time = grid[k + 1];
                }
            }
            value(x, hit, hit_time, out.data());
            for (std::size_t j = 0; j < nvals; ++j) {
                acc[j].sum += out[j];
                acc[j].sum_sq += out[j] * out[j];
            }
        }
    };

    unsigned nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = static_cast<unsigned>(std::min<std::uint64_t>(nthreads, nchunks));
    if (nthreads <= 1) {
        for (std::uint64_t c = 0; c < nchunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (std::uint64_t c; (c = next.fetch_add(1)) < nchunks;) run_chunk(c);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<MCResult> results(nvals);
    const double n = static_cast<double>(cfg.paths);
    for (std::size_t j = 0; j < nvals; ++j) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::uint64_t c = 0; c < nchunks; ++c) {
            sum += sums[c * nvals + j].sum;
            sum_sq += sums[c * nvals + j].sum_sq;
        }
        const double mean = sum / n;
        const double var = n > 1.0 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
        results[j] = {mean, std::sqrt(var / n), cfg.paths, nsteps};
    }
    return results;
}

}  // namespace detail

/// Discounted payoff mean and standard error.
inline MCResult mc_price(const PiecewiseHestonParams& params, const Market& m, const InstrumentSpec& spec,
                         const MCConfig& cfg = {}) {
    std::visit([](const auto& s) { s.validate(); }, spec);
    const double T = instrument_maturity(spec);
    const double df_T = std::exp(-m.r_dom * T);
    const auto* barrier = std::get_if<WindowBarrierSpec>(&spec);
    auto value = [&](double x, bool hit, double hit_time, double* out) {
        const double spot = std::exp(x);
        if (const auto* v = std::get_if<VanillaSpec>(&spec)) {
            *out = df_T * payoff_value(*v, spot);
        } else if (const auto* f = std::get_if<ForwardSpec>(&spec)) {
            *out = df_T * (spot - f->strike);
        } else if (barrier->knock == KnockType::KnockIn) {
            *out = hit ? df_T * payoff_value(barrier->payoff, spot) : 0.0;
        } else {
            *out = hit ? barrier->rebate * std::exp(-m.r_dom * hit_time) : df_T * payoff_value(barrier->payoff, spot);
        }
    };
    return detail::mc_simulate(params, m, T, barrier, cfg, 1, value).front();
}

/// Several vanillas of one maturity priced on the same paths.
inline std::vector<MCResult> mc_price_vanillas(const PiecewiseHestonParams& params, const Market& m,
                                               const std::vector<VanillaSpec>& specs, const MCConfig& cfg = {}) {
    if (specs.empty()) return {};
    for (const auto& s : specs) {
        s.validate();
        if (s.maturity != specs.front().maturity)
            throw std::invalid_argument("mc_price_vanillas: maturities differ");
    }
    const double T = specs.front().maturity;
    const double df_T = std::exp(-m.r_dom * T);
    auto value = [&](double x, bool, double, double* out) {
        const double spot = std::exp(x);
        for (std::size_t j = 0; j < specs.size(); ++j) out[j] = df_T * payoff_value(specs[j], spot);
    };
    return detail::mc_simulate(params, m, T, nullptr, cfg, specs.size(), value);
}

}  // namespace pwh
