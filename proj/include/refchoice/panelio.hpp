#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "refchoice/datagen.hpp"
#include "refchoice/estimator.hpp"
#include "refchoice/panel.hpp"
#include "refchoice/twostep.hpp"

namespace refchoice {

using nlohmann::json;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        throw IoError("failed to format number");
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s, std::size_t row) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("row " + std::to_string(row) + ": bad number '" + s + "'");
    return v;
}

inline long parse_long(const std::string& s, std::size_t row) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("row " + std::to_string(row) + ": bad integer '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

// Strict object access: every key must be known, every listed key present.
inline void require_keys(const json& obj, const std::string& what,
                         const std::vector<std::string>& keys) {
    if (!obj.is_object()) throw ParseError(what + ": expected an object");
    for (const auto& [k, v] : obj.items()) {
        bool known = false;
        for (const auto& key : keys)
            if (k == key) known = true;
        if (!known) throw ParseError(what + ": unknown key '" + k + "'");
    }
    for (const auto& key : keys)
        if (!obj.contains(key)) throw ParseError(what + ": missing key '" + key + "'");
}

inline void check_schema(const json& obj, const std::string& expected) {
    if (!obj.is_object() || !obj.contains("schema") || !obj["schema"].is_string())
        throw ParseError("missing schema tag (expected '" + expected + "')");
    std::string got = obj["schema"].get<std::string>();
    if (got != expected)
        throw ParseError("schema mismatch: expected '" + expected + "', got '" + got + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------
// Panel CSV: header `household,period,brand,price,choice`, one row per
// (household, period, brand), canonical ascending order on write.

inline std::string panel_to_csv(const ChoicePanel& panel) {
    std::string out = "household,period,brand,price,choice\n";
    for (std::size_t i = 0; i < panel.households.size(); ++i) {
        const Household& h = panel.households[i];
        const PricePath& path = panel.paths[h.path];
        for (std::size_t t = 0; t < path.periods; ++t)
            for (std::size_t j = 0; j < path.brands; ++j) {
                out += std::to_string(i + 1);
                out += ',';
                out += std::to_string(t + 1);
                out += ',';
                out += std::to_string(j + 1);
                out += ',';
                out += detail::format_double(path.at(t, j));
                out += ',';
                out += (h.outcomes[t] == static_cast<int>(j + 1)) ? '1' : '0';
                out += '\n';
            }
    }
    return out;
}

inline void write_panel(const ChoicePanel& panel, const std::string& path) {
    detail::write_file(path, panel_to_csv(panel));
}

inline ChoicePanel panel_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    if (!std::getline(in, line) || line != "household,period,brand,price,choice")
        throw ParseError("row 1: bad header (expected 'household,period,brand,price,choice')");
    row = 1;

    struct Cell {
        double price;
        int choice;
        std::size_t row;
    };
    // household -> period -> brand -> cell
    std::map<long, std::map<long, std::map<long, Cell>>> grid;
    long max_brand = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = detail::split_csv(line);
        if (f.size() != 5)
            throw ParseError("row " + std::to_string(row) + ": expected 5 fields");
        long hh = detail::parse_long(f[0], row);
        long t = detail::parse_long(f[1], row);
        long j = detail::parse_long(f[2], row);
        double price = detail::parse_double(f[3], row);
        long choice = detail::parse_long(f[4], row);
        if (hh < 1 || t < 1 || j < 1)
            throw ParseError("row " + std::to_string(row) + ": indices must be >= 1");
        if (!(price > 0.0))
            throw ParseError("row " + std::to_string(row) + ": non-positive price");
        if (choice != 0 && choice != 1)
            throw ParseError("row " + std::to_string(row) + ": choice must be 0 or 1");
        auto [it, inserted] = grid[hh][t].emplace(j, Cell{price, static_cast<int>(choice), row});
        if (!inserted)
            throw ParseError("row " + std::to_string(row) + ": duplicate (household, period, brand)");
        max_brand = std::max(max_brand, j);
    }
    if (grid.empty()) throw ParseError("panel has no data rows");
    const auto K = static_cast<std::size_t>(max_brand);

    ChoicePanel panel;
    std::map<std::vector<double>, std::size_t> path_index;  // dedupe shared paths
    long expected_hh = 1;
    for (const auto& [hh, periods] : grid) {
        if (hh != expected_hh++)
            throw ParseError("household ids must be contiguous from 1 (missing household " +
                             std::to_string(expected_hh - 1) + ")");
        PricePath path;
        path.brands = K;
        path.periods = periods.size();
        path.prices.resize(path.periods * K);
        std::vector<int> outcomes(path.periods);
        long expected_t = 1;
        for (const auto& [t, brands] : periods) {
            if (t != expected_t)
                throw ParseError("household " + std::to_string(hh) + ": gap in periods at period " +
                                 std::to_string(expected_t));
            ++expected_t;
            if (brands.size() != K)
                throw ParseError("household " + std::to_string(hh) + " period " + std::to_string(t) +
                                 ": expected " + std::to_string(K) + " brand rows, got " +
                                 std::to_string(brands.size()));
            int chosen = 0;
            long expected_j = 1;
            for (const auto& [j, cell] : brands) {
                if (j != expected_j++)
                    throw ParseError("household " + std::to_string(hh) + " period " +
                                     std::to_string(t) + ": missing brand row " +
                                     std::to_string(expected_j - 1));
                path.at(static_cast<std::size_t>(t - 1), static_cast<std::size_t>(j - 1)) =
                    cell.price;
                if (cell.choice == 1) {
                    if (chosen != 0)
                        throw ParseError("row " + std::to_string(cell.row) +
                                         ": second choice=1 in household " + std::to_string(hh) +
                                         " period " + std::to_string(t));
                    chosen = static_cast<int>(j);
                }
            }
            outcomes[static_cast<std::size_t>(t - 1)] = chosen;
        }
        auto [it, inserted] = path_index.emplace(path.prices, panel.paths.size());
        if (inserted) panel.paths.push_back(std::move(path));
        panel.households.push_back(Household{it->second, std::move(outcomes)});
    }
    panel.validate();
    return panel;
}

inline ChoicePanel read_panel(const std::string& path) {
    return panel_from_csv(detail::read_file(path));
}

// ---------------------------------------------------------------------
// Mixture / simulation config JSON.

inline json mixture_to_json(const MixtureParameters& mix) {
    json segs = json::array();
    for (const auto& s : mix.segments)
        segs.push_back({{"pi", s.pi},
                        {"alpha0", s.alpha0},
                        {"alpha1", s.alpha1},
                        {"intercepts", s.brand_intercepts},
                        {"beta_g", s.beta_g},
                        {"beta_l", s.beta_l},
                        {"beta_p", s.beta_p}});
    return {{"psi", mix.psi}, {"segments", segs}};
}

inline MixtureParameters mixture_from_json(const json& j) {
    detail::require_keys(j, "mixture", {"psi", "segments"});
    MixtureParameters mix;
    mix.psi = j["psi"].get<std::vector<double>>();
    for (const auto& js : j["segments"]) {
        detail::require_keys(js, "segment",
                             {"pi", "alpha0", "alpha1", "intercepts", "beta_g", "beta_l", "beta_p"});
        SegmentParameters s;
        s.pi = js["pi"].get<double>();
        if (!(s.pi >= 0.0 && s.pi <= 1.0)) throw ParseError("segment: pi must lie in [0,1]");
        s.alpha0 = js["alpha0"].get<double>();
        s.alpha1 = js["alpha1"].get<double>();
        s.brand_intercepts = js["intercepts"].get<std::vector<double>>();
        s.beta_g = js["beta_g"].get<double>();
        s.beta_l = js["beta_l"].get<double>();
        s.beta_p = js["beta_p"].get<double>();
        mix.segments.push_back(std::move(s));
    }
    mix.validate();
    return mix;
}

constexpr const char* kSimConfigSchema = "refchoice/sim-config/1";
constexpr const char* kMixtureSchema = "refchoice/mixture/1";
constexpr const char* kFitReportSchema = "refchoice/fit-report/1";
constexpr const char* kCompareReportSchema = "refchoice/compare-report/1";

inline json sim_spec_to_json(const SimulationSpec& spec) {
    return {{"schema", kSimConfigSchema},
            {"households", spec.households},
            {"periods", spec.periods},
            {"brands", spec.brands},
            {"seed", spec.seed},
            {"price",
             {{"base_price", spec.price.base_price},
              {"promo_probability", spec.price.promo_probability},
              {"promo_depth", spec.price.promo_depth},
              {"noise_sd", spec.price.noise_sd},
              {"shared_prices", spec.price.shared_prices}}},
            {"mixture", mixture_to_json(spec.mix)}};
}

inline SimulationSpec sim_spec_from_json(const json& j) {
    detail::check_schema(j, kSimConfigSchema);
    detail::require_keys(
        j, "sim config", {"schema", "households", "periods", "brands", "seed", "price", "mixture"});
    SimulationSpec spec;
    spec.households = j["households"].get<std::size_t>();
    spec.periods = j["periods"].get<std::size_t>();
    spec.brands = j["brands"].get<std::size_t>();
    spec.seed = j["seed"].get<std::uint64_t>();
    const json& p = j["price"];
    detail::require_keys(p, "price config",
                         {"base_price", "promo_probability", "promo_depth", "noise_sd",
                          "shared_prices"});
    spec.price.base_price = p["base_price"].get<std::vector<double>>();
    spec.price.promo_probability = p["promo_probability"].get<double>();
    spec.price.promo_depth = p["promo_depth"].get<double>();
    spec.price.noise_sd = p["noise_sd"].get<double>();
    spec.price.shared_prices = p["shared_prices"].get<bool>();
    spec.mix = mixture_from_json(j["mixture"]);
    spec.validate();
    return spec;
}

inline json parse_json_file(const std::string& path) {
    try {
        return json::parse(detail::read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline SimulationSpec read_sim_config(const std::string& path) {
    return sim_spec_from_json(parse_json_file(path));
}

inline void write_sim_config(const SimulationSpec& spec, const std::string& path) {
    detail::write_file(path, sim_spec_to_json(spec).dump(2) + "\n");
}

inline MixtureParameters read_mixture(const std::string& path) {
    json j = parse_json_file(path);
    detail::check_schema(j, kMixtureSchema);
    detail::require_keys(j, "mixture file", {"schema", "mixture"});
    return mixture_from_json(j["mixture"]);
}

inline void write_mixture(const MixtureParameters& mix, const std::string& path) {
    json j = {{"schema", kMixtureSchema}, {"mixture", mixture_to_json(mix)}};
    detail::write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------
// Fit report.

struct TwoStepSummary {
    double pi_hat = 0.0;
    double init_fraction = 0.0;
    std::vector<double> grid;
    std::vector<double> logliks;
};

struct FitReport {
    std::string model;  // "joint" or "twostep"
    std::size_t brands = 0;
    std::size_t segments = 0;
    ParameterTable table;
    StandardErrors std_errors;
    std::vector<bool> significant;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    int n_starts = 0;
    long floor_events = 0;
    double grad_norm = 0.0;
    double wall_time_s = 0.0;
    std::optional<TwoStepSummary> twostep;
};

inline FitReport make_report(const FitResult& fit, std::size_t brands, std::size_t segments,
                             const std::string& model) {
    FitReport r;
    r.model = model;
    r.brands = brands;
    r.segments = segments;
    r.table = fit.table;
    r.std_errors = fit.std_errors;
    r.significant = fit.significant;
    r.loglik = fit.loglik;
    r.converged = fit.converged;
    r.iterations = fit.iterations;
    r.n_starts = fit.n_starts;
    r.floor_events = fit.floor_events;
    r.grad_norm = fit.grad_norm;
    r.wall_time_s = fit.wall_time_s;
    return r;
}

inline json report_to_json(const FitReport& r) {
    json params = json::array();
    for (std::size_t i = 0; i < r.table.names.size(); ++i) {
        json p = {{"name", r.table.names[i]},
                  {"estimate", r.table.estimates[i]},
                  {"fixed", static_cast<bool>(r.table.fixed[i])}};
        if (r.std_errors.available[i]) {
            p["se"] = r.std_errors.se[i];
            p["significant"] = static_cast<bool>(r.significant[i]);
        } else {
            p["se"] = nullptr;
            p["significant"] = nullptr;
        }
        params.push_back(p);
    }
    json j = {{"schema", kFitReportSchema},
              {"model", r.model},
              {"brands", r.brands},
              {"segments", r.segments},
              {"parameters", params},
              {"loglik", r.loglik},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"n_starts", r.n_starts},
              {"floor_events", r.floor_events},
              {"grad_norm", r.grad_norm},
              {"hessian_positive_definite", r.std_errors.hessian_positive_definite},
              {"wall_time_s", r.wall_time_s}};
    if (r.twostep) {
        j["twostep"] = {{"pi_hat", r.twostep->pi_hat},
                        {"init_fraction", r.twostep->init_fraction},
                        {"grid", r.twostep->grid},
                        {"logliks", r.twostep->logliks}};
    }
    return j;
}

inline FitReport report_from_json(const json& j) {
    detail::check_schema(j, kFitReportSchema);
    std::vector<std::string> keys = {"schema",       "model",       "brands",
                                     "segments",     "parameters",  "loglik",
                                     "converged",    "iterations",  "n_starts",
                                     "floor_events", "grad_norm",   "hessian_positive_definite",
                                     "wall_time_s"};
    if (j.contains("twostep")) keys.push_back("twostep");
    detail::require_keys(j, "fit report", keys);
    FitReport r;
    r.model = j["model"].get<std::string>();
    r.brands = j["brands"].get<std::size_t>();
    r.segments = j["segments"].get<std::size_t>();
    for (const auto& p : j["parameters"]) {
        detail::require_keys(p, "parameter", {"name", "estimate", "fixed", "se", "significant"});
        r.table.names.push_back(p["name"].get<std::string>());
        r.table.estimates.push_back(p["estimate"].get<double>());
        r.table.fixed.push_back(p["fixed"].get<bool>());
        if (p["se"].is_null()) {
            r.std_errors.se.push_back(0.0);
            r.std_errors.available.push_back(false);
            r.significant.push_back(false);
        } else {
            r.std_errors.se.push_back(p["se"].get<double>());
            r.std_errors.available.push_back(true);
            r.significant.push_back(p["significant"].get<bool>());
        }
    }
    r.loglik = j["loglik"].get<double>();
    r.converged = j["converged"].get<bool>();
    r.iterations = j["iterations"].get<int>();
    r.n_starts = j["n_starts"].get<int>();
    r.floor_events = j["floor_events"].get<long>();
    r.grad_norm = j["grad_norm"].get<double>();
    r.std_errors.hessian_positive_definite = j["hessian_positive_definite"].get<bool>();
    r.wall_time_s = j["wall_time_s"].get<double>();
    if (j.contains("twostep")) {
        detail::require_keys(j["twostep"], "twostep summary",
                             {"pi_hat", "init_fraction", "grid", "logliks"});
        TwoStepSummary ts;
        ts.pi_hat = j["twostep"]["pi_hat"].get<double>();
        ts.init_fraction = j["twostep"]["init_fraction"].get<double>();
        ts.grid = j["twostep"]["grid"].get<std::vector<double>>();
        ts.logliks = j["twostep"]["logliks"].get<std::vector<double>>();
        r.twostep = std::move(ts);
    }
    return r;
}

inline void write_report(const FitReport& r, const std::string& path) {
    detail::write_file(path, report_to_json(r).dump(2) + "\n");
}

inline FitReport read_report(const std::string& path) {
    return report_from_json(parse_json_file(path));
}

// Human-readable table, one segment per column (the file format stays
// the JSON serialization above).
inline std::string render_report(const FitReport& r) {
    std::ostringstream out;
    out << "model: " << r.model << "   brands: " << r.brands << "   segments: " << r.segments
        << "\n";
    out << "log-likelihood: " << detail::format_double(r.loglik)
        << "   converged: " << (r.converged ? "yes" : "no") << "\n";
    out << "wall time: " << detail::format_double(r.wall_time_s) << " s   starts: " << r.n_starts
        << "   iterations: " << r.iterations << "\n";
    if (r.twostep)
        out << "two-step pi_hat: " << detail::format_double(r.twostep->pi_hat)
            << " (grid of " << r.twostep->grid.size() << ", init fraction "
            << detail::format_double(r.twostep->init_fraction) << ")\n";
    out << "\n";
    for (std::size_t i = 0; i < r.table.names.size(); ++i) {
        out << "  " << r.table.names[i] << " = " << detail::format_double(r.table.estimates[i]);
        if (r.table.fixed[i]) {
            out << "  [fixed]";
        } else if (r.std_errors.available[i]) {
            out << "  (se " << detail::format_double(r.std_errors.se[i]) << ")";
            if (r.significant[i]) out << " (*)";
        } else {
            out << "  (se unavailable)";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace refchoice
