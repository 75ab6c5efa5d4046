// pwheston: calibrate piecewise Heston schedules, price vanillas and window
// barriers, dump characteristic-function integrands.
//
// Exit codes: 0 success, 1 a computation did not converge, 2 usage error,
// 3 invalid input file.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <pwheston/analytic_pricer.hpp>
#include <pwheston/calibrator.hpp>
#include <pwheston/fd_pricer.hpp>
#include <pwheston/io.hpp>
#include <pwheston/mc_oracle.hpp>

using namespace pwh;
using json = nlohmann::json;

namespace {

constexpr int kNotConverged = 1;
constexpr int kUsage = 2;
constexpr int kBadInput = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Options that may also come from the --config JSON file. A flag given on
/// the command line wins; the JSON key is the long flag name with '-' -> '_'.
class ConfigBinder {
public:
    explicit ConfigBinder(CLI::App& app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& flag, T& var, const std::string& help) {
        CLI::Option* o = app_.add_option(flag, var, help)->capture_default_str();
        bind(o, flag, var);
        return o;
    }

    CLI::Option* add_flag(const std::string& flag, bool& var, const std::string& help) {
        CLI::Option* o = app_.add_flag(flag, var, help);
        bind(o, flag, var);
        return o;
    }

    void apply(const json& cfg) const {
        for (const auto& f : appliers_) f(cfg);
    }

private:
    template <class T>
    void bind(CLI::Option* o, const std::string& flag, T& var) {
        std::string key = flag.substr(0, flag.find(','));
        key = key.substr(key.find_first_not_of('-'));
        for (auto& c : key)
            if (c == '-') c = '_';
        appliers_.push_back([o, key, &var](const json& cfg) {
            if (o->count() == 0 && cfg.contains(key)) var = cfg.at(key).get<T>();
        });
    }

    CLI::App& app_;
    std::vector<std::function<void(const json&)>> appliers_;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw std::runtime_error("config " + path + ": top level must be an object");
        return j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
}

/// Writes the finished table to the file, or to stdout when the path is empty.
void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f || !(f << text)) throw std::runtime_error("cannot write " + path);
}

struct Common {
    std::string config, output, engine;
    std::uint64_t seed = 0;
    double tolerance = 0.0;
};

void add_common(ConfigBinder& b, CLI::App& app, Common& c, const std::string& engine_help, const std::string& seed_help,
                const std::string& tol_help) {
    app.add_option("--config", c.config, "JSON file with default values for any option");
    b.add("--output,-o", c.output, "output path");
    b.add("--engine", c.engine, engine_help);
    b.add("--seed", c.seed, seed_help);
    b.add("--tolerance", c.tolerance, tol_help);
}

// ------------------------------------------------------------- calibrate

struct CalibrateArgs {
    Common common;
    std::string quotes;
    std::vector<double> intervals;
    std::string weighting = "vega";
    double fixed_kappa = 1.5;
    int max_iterations = 200;
};

ResidualWeighting parse_weighting(const std::string& w) {
    if (w == "price") return ResidualWeighting::Price;
    if (w == "vega") return ResidualWeighting::VegaWeighted;
    if (w == "vol") return ResidualWeighting::Vol;
    throw UsageError("unknown weighting '" + w + "' (price, vega, vol)");
}

int run_calibrate(const CalibrateArgs& a) {
    if (a.common.engine != "analytic") throw UsageError("calibrate supports only the analytic engine");
    if (a.common.output.empty()) throw UsageError("calibrate needs --output DIR");
    if (read_csv_file(a.quotes).rows.empty()) throw UsageError(a.quotes + " contains no quotes");
    const QuoteSurface surface = read_quotes_file(a.quotes);

    CalibrationConfig cfg;
    cfg.weighting = parse_weighting(a.weighting);
    cfg.fixed_kappa = a.fixed_kappa;
    cfg.lm.max_iterations = a.max_iterations;
    if (a.common.tolerance > 0.0) cfg.lm.gradient_tolerance = a.common.tolerance;

    GlobalFitStart start;
    if (a.common.seed != 0) {
        boost::random::mt19937_64 rng(a.common.seed);
        start.rho = boost::random::uniform_real_distribution<double>(-0.7, 0.0)(rng);
        start.xi = boost::random::uniform_real_distribution<double>(0.1, 0.8)(rng);
    }
    std::vector<double> intervals = a.intervals;
    if (intervals.empty())
        for (const auto& t : surface.tenors) intervals.push_back(t.slice.tau);

    const auto global = global_fit(surface, {}, cfg, start);
    const auto boot = bootstrap_fit(surface, global, intervals, {}, cfg);

    const std::filesystem::path dir(a.common.output);
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "schedule.csv");
        write_schedule(f, boot.params);
    }
    {
        std::ofstream f(dir / "global.csv");
        write_schedule(f, global.params);
    }
    {
        std::ofstream f(dir / "residuals.csv");
        f << "tenor,delta,strike,market_price,model_price,market_vol,model_vol,global_vol,vol_error\n";
        for (std::size_t i = 0; i < boot.residuals.size(); ++i) {
            const auto& r = boot.residuals[i];
            f << fmt10(r.tenor) << ',' << delta_label(r.delta) << ',' << fmt10(r.strike) << ',' << fmt10(r.market_price)
              << ',' << fmt10(r.model_price) << ',' << fmt10(r.market_vol) << ',' << fmt10(r.model_vol) << ','
              << fmt10(global.residuals[i].model_vol) << ',' << fmt10(r.model_vol - r.market_vol) << '\n';
        }
    }
    {
        std::ofstream f(dir / "segments.csv");
        f << "stage,from,to,iterations,objective,converged,status\n";
        auto row = [&](const std::string& stage, const SegmentDiagnostics& s) {
            f << stage << ',' << fmt10(s.t_start) << ',' << fmt10(s.t_end) << ',' << s.iterations << ','
              << fmt10(s.objective) << ',' << (s.converged ? "yes" : "no") << ',' << s.status << '\n';
        };
        for (const auto& s : global.segments) row("global", s);
        for (const auto& s : boot.segments) row("bootstrap", s);
    }

    double max_vol = 0.0;
    for (const auto& r : boot.residuals) max_vol = std::max(max_vol, std::abs(r.model_vol - r.market_vol));
    std::cout << "quotes " << surface.quote_count() << ", segments " << boot.params.segments.size()
              << ", max vol residual " << fmt10(max_vol) << '\n';
    bool ok = global.converged;
    if (!global.converged) std::cerr << "global fit did not converge: " << global.segments.front().status << '\n';
    for (const auto& s : boot.segments) {
        if (s.converged) continue;
        ok = false;
        std::cerr << "segment [" << fmt10(s.t_start) << ", " << fmt10(s.t_end) << "] did not converge: " << s.status
                  << '\n';
    }
    return ok ? 0 : kNotConverged;
}

// ----------------------------------------------------------------- price

struct PriceArgs {
    Common common;
    std::string schedule, instruments;
    double spot = 0.0, r_dom = 0.0, r_for = 0.0;
    std::uint64_t paths = 100'000;
    double mc_steps_per_year = 365.0;
    bool bridge = false;
    int x_nodes = FDConfig{}.x_nodes, v_nodes = FDConfig{}.v_nodes;
    double fd_steps_per_year = FDConfig{}.steps_per_year;
    bool richardson = false;
};

std::vector<std::string> split_engines(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s + ",") {
        if (c != ',') {
            cur += c;
            continue;
        }
        if (cur != "analytic" && cur != "fd" && cur != "mc") throw UsageError("unknown engine '" + cur + "' (analytic, fd, mc)");
        out.push_back(cur);
        cur.clear();
    }
    return out;
}

int run_price(const PriceArgs& a) {
    const auto engines = split_engines(a.common.engine);
    if (!(a.spot > 0.0)) throw UsageError("price needs --spot > 0");
    const auto params = read_schedule_file(a.schedule);
    const auto instruments = read_instruments_file(a.instruments);
    if (instruments.empty()) throw UsageError(a.instruments + ": no instruments");
    for (const auto& e : engines)
        for (const auto& ins : instruments)
            if (e == "analytic" && std::holds_alternative<WindowBarrierSpec>(ins.spec))
                throw UsageError("the analytic engine cannot price window barrier '" + ins.id + "'");
    const Market m{a.spot, a.r_dom, a.r_for};

    QuadratureConfig quad;
    if (a.common.tolerance > 0.0) quad.abs_tolerance = quad.rel_tolerance = a.common.tolerance;
    FDConfig fd;
    fd.x_nodes = a.x_nodes;
    fd.v_nodes = a.v_nodes;
    fd.steps_per_year = a.fd_steps_per_year;
    fd.richardson = a.richardson;
    MCConfig mc;
    mc.paths = a.paths;
    mc.steps_per_year = a.mc_steps_per_year;
    mc.seed = a.common.seed;
    mc.brownian_bridge = a.bridge;

    std::ostringstream os;
    os << "id,kind,engine,price,std_error,vanilla\n";
    int status = 0;
    for (const auto& ins : instruments) {
        const bool barrier = std::holds_alternative<WindowBarrierSpec>(ins.spec);
        for (const auto& e : engines) {
            double price = 0.0;
            std::string se, vanilla;
            if (e == "analytic") {
                const auto& v = std::get<VanillaSpec>(ins.spec);
                try {
                    price = v.type == OptionType::Call ? heston_call_cv(params, m, v.maturity, v.strike, quad)
                                                       : heston_put_cv(params, m, v.maturity, v.strike, quad);
                } catch (const AccuracyError& err) {
                    std::cerr << ins.id << ": " << err.what() << '\n';
                    status = kNotConverged;
                    price = std::numeric_limits<double>::quiet_NaN();
                }
                price *= v.notional;
            } else if (e == "fd") {
                if (barrier) {
                    const auto r = fd_price_detail(params, m, std::get<WindowBarrierSpec>(ins.spec), fd);
                    for (const auto& w : r.warnings) std::cerr << ins.id << ": " << w << '\n';
                    price = r.price;
                    vanilla = fmt10(r.vanilla);
                } else {
                    price = fd_price_vanilla(params, m, std::get<VanillaSpec>(ins.spec), fd);
                }
            } else {
                const InstrumentSpec spec = barrier ? InstrumentSpec(std::get<WindowBarrierSpec>(ins.spec))
                                                    : InstrumentSpec(std::get<VanillaSpec>(ins.spec));
                const auto r = mc_price(params, m, spec, mc);
                price = r.price;
                se = fmt10(r.std_error);
            }
            os << ins.id << ',' << (barrier ? "barrier" : "vanilla") << ',' << e << ',' << fmt10(price) << ',' << se
               << ',' << vanilla << '\n';
        }
    }
    emit(a.common.output, os.str());
    return status;
}

// -------------------------------------------------------- integrand-dump

struct DumpArgs {
    Common common;
    std::string schedule;
    double spot = 0.0, r_dom = 0.0, r_for = 0.0;
    double tenor = 0.0, strike = 0.0, moneyness = 0.0;
    double phi_min = 0.01, phi_max = 100.0;
    int points = 2000;
};

int run_dump(const DumpArgs& a) {
    if (a.common.engine != "analytic") throw UsageError("integrand-dump supports only the analytic engine");
    if (!(a.spot > 0.0)) throw UsageError("integrand-dump needs --spot > 0");
    if ((a.strike > 0.0) == (a.moneyness > 0.0)) throw UsageError("give exactly one of --strike and --moneyness");
    if (!(a.phi_min > 0.0 && a.phi_max > a.phi_min) || a.points < 2) throw UsageError("need 0 < phi-min < phi-max, points >= 2");
    const auto params = read_schedule_file(a.schedule);
    const Market m{a.spot, a.r_dom, a.r_for};
    const double T = a.tenor > 0.0 ? a.tenor : params.horizon();
    const double K = a.strike > 0.0 ? a.strike : a.moneyness * a.spot;
    detail::check_pricing_inputs(params, m, T, K);

    std::ostringstream os;
    os << "phi,with_cv_p1,without_cv_p1,log10_with_cv_p1,log10_without_cv_p1,"
          "with_cv_p2,without_cv_p2,log10_with_cv_p2,log10_without_cv_p2\n";
    for (int i = 0; i < a.points; ++i) {
        const double phi = a.phi_min + (a.phi_max - a.phi_min) * i / (a.points - 1);
        os << fmt10(phi);
        for (ProbIndex j : {ProbIndex::P1, ProbIndex::P2}) {
            const double w = tilde_p_integrand(params, m, T, K, phi, j);
            const double wo = plain_p_integrand(params, m, T, K, phi, j);
            os << ',' << fmt10(w) << ',' << fmt10(wo) << ',' << fmt10(std::log10(std::abs(w))) << ','
               << fmt10(std::log10(std::abs(wo)));
        }
        os << '\n';
    }
    emit(a.common.output, os.str());
    return 0;
}

void add_market(ConfigBinder& b, double& spot, double& rd, double& rf) {
    b.add("--spot", spot, "spot rate, domestic per foreign");
    b.add("--r-dom", rd, "domestic continuous rate");
    b.add("--r-for", rf, "foreign continuous rate");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Piecewise Heston calibration and window barrier pricing"};
    app.require_subcommand(1);

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "fit a piecewise schedule to delta-quoted vols");
    ConfigBinder cb(*c);
    cal.common.engine = "analytic";
    add_common(cb, *c, cal.common, "pricing engine (analytic only)", "0 = default global start, else randomised",
               "Levenberg-Marquardt gradient tolerance");
    cb.add("--quotes", cal.quotes, "quotes CSV: tenor,spot,r_dom,r_for,delta,vol");
    cb.add("--intervals", cal.intervals, "segment end points, each a quoted tenor (default: every tenor)")->delimiter(',');
    cb.add("--weighting", cal.weighting, "residuals: price, vega or vol");
    cb.add("--fixed-kappa", cal.fixed_kappa, "kappa held fixed in the global stage");
    cb.add("--max-iterations", cal.max_iterations, "iteration cap per fit");

    PriceArgs pr;
    auto* p = app.add_subcommand("price", "price instruments under a schedule");
    ConfigBinder pb(*p);
    pr.common.engine = "analytic";
    add_common(pb, *p, pr.common, "comma-separated list of analytic, fd, mc", "Monte Carlo seed",
               "quadrature tolerance, absolute and relative");
    pb.add("--schedule", pr.schedule, "schedule CSV: from,to,v0,theta,kappa,rho,xi");
    pb.add("--instruments", pr.instruments, "instruments CSV");
    add_market(pb, pr.spot, pr.r_dom, pr.r_for);
    pb.add("--paths", pr.paths, "Monte Carlo paths");
    pb.add("--mc-steps-per-year", pr.mc_steps_per_year, "Monte Carlo time steps per year");
    pb.add_flag("--bridge", pr.bridge, "Brownian-bridge crossing correction in Monte Carlo");
    pb.add("--x-nodes", pr.x_nodes, "FD log-spot nodes");
    pb.add("--v-nodes", pr.v_nodes, "FD variance nodes");
    pb.add("--fd-steps-per-year", pr.fd_steps_per_year, "FD time steps per year");
    pb.add_flag("--richardson", pr.richardson, "FD Richardson extrapolation over a doubled grid");

    DumpArgs du;
    auto* d = app.add_subcommand("integrand-dump", "tabulate the probability integrands with and without control variate");
    ConfigBinder db(*d);
    du.common.engine = "analytic";
    add_common(db, *d, du.common, "analytic only", "unused", "unused");
    db.add("--schedule", du.schedule, "schedule CSV");
    add_market(db, du.spot, du.r_dom, du.r_for);
    db.add("--tenor", du.tenor, "expiry in years (default: schedule horizon)");
    db.add("--strike", du.strike, "strike");
    db.add("--moneyness", du.moneyness, "strike as a multiple of spot");
    db.add("--phi-min", du.phi_min, "first phi");
    db.add("--phi-max", du.phi_max, "last phi");
    db.add("--points", du.points, "number of phi values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (c->parsed()) {
            cb.apply(load_config(cal.common.config));
            if (cal.quotes.empty()) throw UsageError("calibrate needs --quotes");
            return run_calibrate(cal);
        }
        if (p->parsed()) {
            pb.apply(load_config(pr.common.config));
            if (pr.schedule.empty() || pr.instruments.empty()) throw UsageError("price needs --schedule and --instruments");
            return run_price(pr);
        }
        db.apply(load_config(du.common.config));
        if (du.schedule.empty()) throw UsageError("integrand-dump needs --schedule");
        return run_dump(du);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const CsvError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    }
}
