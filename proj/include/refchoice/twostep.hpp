#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "refchoice/estimator.hpp"

namespace refchoice {

// Legacy two-step baseline: pick one pooled carry-over weight by grid
// search on a per-household initialization split, then fit the choice
// model conditional on it using only the calibration periods.

struct TwoStepConfig {
    std::vector<double> grid;      // strictly increasing, in [0, 1]
    double init_fraction = 0.3;

    void validate() const {
        if (grid.empty()) throw std::invalid_argument("two-step: empty grid");
        double prev = -1.0;
        for (double g : grid) {
            if (!(g >= 0.0 && g <= 1.0 && g > prev))
                throw std::invalid_argument("two-step: grid must be strictly increasing in [0,1]");
            prev = g;
        }
        if (!(init_fraction > 0.0 && init_fraction < 1.0))
            throw std::invalid_argument("two-step: init_fraction must lie in (0,1)");
    }
};

inline std::vector<double> make_grid(double step) {
    if (!(step > 0.0 && step <= 1.0))
        throw std::invalid_argument("two-step: grid step must lie in (0,1]");
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        double v = i * step;
        if (v >= 1.0 - 1e-12) {
            grid.push_back(1.0);
            break;
        }
        grid.push_back(v);
    }
    return grid;
}

// Per-household first calibration period (1-based): T0 + 1 with
// T0 = floor(init_fraction * T). Reference prices are warm-started from
// the initialization periods, so the likelihood range starts at T0 + 1
// while price histories stay whole.
inline std::vector<std::size_t> split_panel(const ChoicePanel& panel, double init_fraction) {
    if (!(init_fraction > 0.0 && init_fraction < 1.0))
        throw std::invalid_argument("split_panel: init_fraction must lie in (0,1)");
    std::vector<std::size_t> first_calibration(panel.households.size());
    std::string offenders;
    for (std::size_t i = 0; i < panel.households.size(); ++i) {
        std::size_t T = panel.households[i].outcomes.size();
        auto t0 = static_cast<std::size_t>(std::floor(init_fraction * static_cast<double>(T)));
        if (t0 < 2 || T - t0 < 2) {
            offenders += (offenders.empty() ? "" : ", ") + std::to_string(i + 1);
            continue;
        }
        first_calibration[i] = t0 + 1;
    }
    if (!offenders.empty())
        throw std::invalid_argument("split_panel: households too short for split: " + offenders);
    return first_calibration;
}

// estimator::fit with every segment's pi pinned to one shared value and
// the likelihood restricted to calibration periods.
inline FitResult fit_conditional(const ChoicePanel& panel,
                                 const std::vector<std::size_t>& first_calibration,
                                 double pi_fixed, const ModelSpec& spec, FitOptions opts = {}) {
    if (!(pi_fixed >= 0.0 && pi_fixed <= 1.0))
        throw std::invalid_argument("fit_conditional: pi must lie in [0,1]");
    opts.pinned_pi = pi_fixed;
    opts.t_begin = first_calibration;
    return fit(panel, spec, opts);
}

struct GridSearchResult {
    double pi_hat = 0.0;
    std::vector<double> grid;
    std::vector<double> logliks;  // calibration loglik per grid point
    FitResult best;
    double wall_time_s = 0.0;
};

// For each grid pi: conditional fit on the calibration split; the pi with
// the highest calibration loglik wins (ties go to the smaller pi).
inline GridSearchResult grid_search(const ChoicePanel& panel, const TwoStepConfig& config,
                                    const ModelSpec& spec, const FitOptions& opts = {}) {
    config.validate();
    auto t_start = std::chrono::steady_clock::now();
    std::vector<std::size_t> first_calibration = split_panel(panel, config.init_fraction);

    GridSearchResult res;
    res.grid = config.grid;
    res.logliks.resize(config.grid.size());
    std::vector<FitResult> fits(config.grid.size());
    std::string failures;
    bool any_ok = false;
    for (std::size_t g = 0; g < config.grid.size(); ++g) {
        try {
            fits[g] = fit_conditional(panel, first_calibration, config.grid[g], spec, opts);
            res.logliks[g] = fits[g].loglik;
            any_ok = true;
        } catch (const std::exception& e) {
            res.logliks[g] = -std::numeric_limits<double>::infinity();
            failures += "pi=" + std::to_string(config.grid[g]) + ": " + e.what() + "; ";
        }
    }
    if (!any_ok)
        throw std::runtime_error("grid_search: every grid point failed: " + failures);

    std::size_t winner = 0;
    for (std::size_t g = 1; g < config.grid.size(); ++g)
        if (res.logliks[g] > res.logliks[winner]) winner = g;
    res.pi_hat = config.grid[winner];
    res.best = std::move(fits[winner]);
    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

}  // namespace refchoice
