#pragma once

// CSV readers and writers for quotes, parameter schedules and instruments.
// Blank lines and lines starting with '#' are skipped; columns are matched
// by header name, so their order is free.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "calibrator.hpp"
#include "heston_params.hpp"
#include "instruments.hpp"

namespace pwh {

/// Parse failure located at a 1-based file line and a column name.
class CsvError : public std::runtime_error {
public:
    CsvError(const std::string& source, std::size_t line, const std::string& column, const std::string& what)
        : std::runtime_error(source + ": line " + std::to_string(line) + (column.empty() ? "" : ", column '" + column + "'") +
                             ": " + what),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::string column_;
};

/// Ten significant digits, the format of every numeric output.
inline std::string fmt10(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> cells;
};

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    std::optional<std::size_t> find(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    }

    std::size_t require(const std::string& name) const {
        if (auto k = find(name)) return *k;
        throw CsvError(source, 1, name, "missing column");
    }

    const std::string& cell(const CsvRow& r, std::size_t k) const { return r.cells[k]; }

    double number(const CsvRow& r, std::size_t k) const {
        const std::string& s = r.cells[k];
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw CsvError(source, r.line, header[k], "not a number: '" + s + "'");
        return v;
    }

    std::optional<double> optional_number(const CsvRow& r, std::optional<std::size_t> k) const {
        if (!k || r.cells[*k].empty()) return std::nullopt;
        return number(r, *k);
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string s = detail::trim(line);
        if (s.empty() || s.front() == '#') continue;
        auto cells = detail::split(s);
        if (t.header.empty()) {
            for (auto& c : cells) c = detail::lower(c);
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw CsvError(source, n, "",
                           "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
        t.rows.push_back({n, std::move(cells)});
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_csv(in, path);
}

// ---------------------------------------------------------------- quotes

/// Quotes `tenor,spot,r_dom,r_for,delta,vol`; delta is a signed number or ATM.
inline QuoteSurface read_quotes(std::istream& in, const std::string& source = "quotes") {
    const CsvTable t = read_csv(in, source);
    if (t.rows.empty()) throw CsvError(source, 1, "", "no quotes");
    const auto c_tenor = t.require("tenor"), c_spot = t.require("spot"), c_rd = t.require("r_dom"),
               c_rf = t.require("r_for"), c_delta = t.require("delta"), c_vol = t.require("vol");

    std::map<double, TenorQuotes> by_tenor;
    for (const auto& r : t.rows) {
        const double tenor = t.number(r, c_tenor);
        if (!(tenor > 0.0)) throw CsvError(source, r.line, "tenor", "must be positive");
        const MarketSlice slice(t.number(r, c_spot), t.number(r, c_rd), t.number(r, c_rf), tenor);
        if (!(slice.spot > 0.0)) throw CsvError(source, r.line, "spot", "must be positive");
        const std::string& d = t.cell(r, c_delta);
        std::optional<Delta> delta;
        if (detail::lower(d) == "atm") {
            delta = Delta::atm();
        } else {
            const double v = t.number(r, c_delta);
            if (!(std::abs(v) > 0.0 && std::abs(v) < 1.0)) throw CsvError(source, r.line, "delta", "must lie in (-1,0) or (0,1)");
            delta = Delta::of(v);
        }
        const double vol = t.number(r, c_vol);
        if (!(vol > 0.0)) throw CsvError(source, r.line, "vol", "must be positive");

        auto [it, fresh] = by_tenor.try_emplace(tenor, TenorQuotes{slice, {}});
        const auto& s = it->second.slice;
        if (!fresh && (s.spot != slice.spot || s.r_dom != slice.r_dom || s.r_for != slice.r_for))
            throw CsvError(source, r.line, "", "market data differs from earlier rows of the same tenor");
        for (const auto& q : it->second.quotes)
            if (q.delta == *delta) throw CsvError(source, r.line, "delta", "duplicate quote for this tenor");
        it->second.quotes.push_back({*delta, vol});
    }
    QuoteSurface out;
    for (auto& [tenor, q] : by_tenor) out.tenors.push_back(std::move(q));
    for (const auto& q : out.tenors)
        if (q.slice.spot != out.tenors.front().slice.spot)
            throw std::invalid_argument(source + ": all tenors must share one spot");
    return out;
}

inline QuoteSurface read_quotes_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_quotes(in, path);
}

inline std::string delta_label(const Delta& d) { return d.is_atm() ? "ATM" : fmt10(d.value()); }

inline void write_quotes(std::ostream& out, const QuoteSurface& s) {
    out << "tenor,spot,r_dom,r_for,delta,vol\n";
    for (const auto& t : s.tenors)
        for (const auto& q : t.quotes)
            out << fmt10(t.slice.tau) << ',' << fmt10(t.slice.spot) << ',' << fmt10(t.slice.r_dom) << ','
                << fmt10(t.slice.r_for) << ',' << delta_label(q.delta) << ',' << fmt10(q.vol) << '\n';
}

// -------------------------------------------------------------- schedule

/// Schedule `from,to,v0,theta,kappa,rho,xi`, one row per segment, v0 repeated.
inline PiecewiseHestonParams read_schedule(std::istream& in, const std::string& source = "schedule") {
    const CsvTable t = read_csv(in, source);
    if (t.rows.empty()) throw CsvError(source, 1, "", "no segments");
    const auto c_from = t.require("from"), c_to = t.require("to"), c_v0 = t.require("v0"), c_theta = t.require("theta"),
               c_kappa = t.require("kappa"), c_rho = t.require("rho"), c_xi = t.require("xi");
    PiecewiseHestonParams p;
    p.v0 = t.number(t.rows.front(), c_v0);
    for (const auto& r : t.rows) {
        if (t.number(r, c_v0) != p.v0) throw CsvError(source, r.line, "v0", "must be the same on every row");
        HestonSegment s{t.number(r, c_from), t.number(r, c_to), t.number(r, c_kappa),
                        t.number(r, c_theta), t.number(r, c_rho), t.number(r, c_xi)};
        try {
            s.validate();
        } catch (const std::domain_error& e) {
            throw CsvError(source, r.line, "", e.what());
        }
        if (!p.segments.empty() && s.t_start != p.segments.back().t_end)
            throw CsvError(source, r.line, "from", "segment does not start where the previous one ends");
        p.segments.push_back(s);
    }
    try {
        p.validate();
    } catch (const std::domain_error& e) {
        throw CsvError(source, t.rows.front().line, "", e.what());
    }
    return p;
}

inline PiecewiseHestonParams read_schedule_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_schedule(in, path);
}

inline void write_schedule(std::ostream& out, const PiecewiseHestonParams& p) {
    out << "from,to,v0,theta,kappa,rho,xi\n";
    for (const auto& s : p.segments)
        out << fmt10(s.t_start) << ',' << fmt10(s.t_end) << ',' << fmt10(p.v0) << ',' << fmt10(s.theta) << ','
            << fmt10(s.kappa) << ',' << fmt10(s.rho) << ',' << fmt10(s.xi) << '\n';
}

// ----------------------------------------------------------- instruments

struct NamedInstrument {
    std::string id;
    std::variant<VanillaSpec, WindowBarrierSpec> spec;
};

/// Instruments `id,type,strike,maturity[,notional,barrier,side,knock,window_start,window_end,rebate]`.
/// A row with an empty barrier is a vanilla; otherwise side is lower|upper,
/// knock is in|out and the window defaults to [0, maturity].
inline std::vector<NamedInstrument> read_instruments(std::istream& in, const std::string& source = "instruments") {
    const CsvTable t = read_csv(in, source);
    const auto c_id = t.require("id"), c_type = t.require("type"), c_k = t.require("strike"),
               c_T = t.require("maturity");
    const auto c_n = t.find("notional"), c_b = t.find("barrier"), c_side = t.find("side"), c_knock = t.find("knock"),
               c_ta = t.find("window_start"), c_tb = t.find("window_end"), c_reb = t.find("rebate");

    std::vector<NamedInstrument> out;
    for (const auto& r : t.rows) {
        VanillaSpec v;
        const std::string type = detail::lower(t.cell(r, c_type));
        if (type == "call")
            v.type = OptionType::Call;
        else if (type == "put")
            v.type = OptionType::Put;
        else
            throw CsvError(source, r.line, "type", "expected call or put, found '" + t.cell(r, c_type) + "'");
        v.strike = t.number(r, c_k);
        v.maturity = t.number(r, c_T);
        v.notional = t.optional_number(r, c_n).value_or(1.0);

        auto check = [&](auto&& spec) {
            try {
                spec.validate();
            } catch (const std::domain_error& e) {
                throw CsvError(source, r.line, "", e.what());
            }
        };
        const auto barrier = t.optional_number(r, c_b);
        if (!barrier) {
            check(v);
            out.push_back({t.cell(r, c_id), v});
            continue;
        }
        WindowBarrierSpec w;
        w.barrier = *barrier;
        w.payoff = v;
        const std::string side = c_side ? detail::lower(t.cell(r, *c_side)) : "";
        if (side == "lower")
            w.side = BarrierSide::Lower;
        else if (side == "upper")
            w.side = BarrierSide::Upper;
        else
            throw CsvError(source, r.line, "side", "expected lower or upper");
        const std::string knock = c_knock ? detail::lower(t.cell(r, *c_knock)) : "";
        if (knock == "in")
            w.knock = KnockType::KnockIn;
        else if (knock == "out")
            w.knock = KnockType::KnockOut;
        else
            throw CsvError(source, r.line, "knock", "expected in or out");
        w.window_start = t.optional_number(r, c_ta).value_or(0.0);
        w.window_end = t.optional_number(r, c_tb).value_or(v.maturity);
        w.rebate = t.optional_number(r, c_reb).value_or(0.0);
        check(w);
        out.push_back({t.cell(r, c_id), w});
    }
    return out;
}

inline std::vector<NamedInstrument> read_instruments_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_instruments(in, path);
}

}  // namespace pwh
