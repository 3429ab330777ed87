// Command-line driver for simulating scanner panels and estimating
// memory-based reference-price choice models.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "refchoice/panelio.hpp"
#include "refchoice/presets.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
    std::string panel_path;
    std::string out_path;
    std::uint64_t seed = 1;
    std::size_t segments = 1;
    int starts = 8;
    int threads = 1;
};

refchoice::FitOptions fit_options(const CommonOptions& c) {
    refchoice::FitOptions opts;
    opts.starts = c.starts;
    opts.seed = c.seed;
    opts.threads = c.threads;
    return opts;
}

int run_simulate(const std::string& config_path, const CommonOptions& c, bool seed_given,
                 bool segments_given) {
    refchoice::SimulationSpec spec;
    if (!config_path.empty()) {
        spec = refchoice::read_sim_config(config_path);
        if (segments_given && c.segments != spec.mix.segment_count())
            throw refchoice::ParseError("--segments conflicts with the config's mixture");
        if (seed_given) spec.seed = c.seed;
    } else {
        spec = refchoice::default_sim_spec(c.segments, c.seed);
    }
    refchoice::ChoicePanel panel = refchoice::simulate_panel(spec);
    refchoice::write_panel(panel, c.out_path + ".panel.csv");
    refchoice::write_mixture(spec.mix, c.out_path + ".truth.json");
    std::cout << "wrote " << c.out_path << ".panel.csv (" << spec.households << " households, "
              << spec.periods << " periods, " << spec.brands << " brands) and " << c.out_path
              << ".truth.json\n";
    return kExitOk;
}

int run_fit(const CommonOptions& c) {
    refchoice::ChoicePanel panel = refchoice::read_panel(c.panel_path);
    refchoice::ModelSpec spec{panel.brands(), c.segments};
    refchoice::FitResult fit = refchoice::fit(panel, spec, fit_options(c));
    refchoice::FitReport report =
        refchoice::make_report(fit, spec.brands, spec.segments, "joint");
    refchoice::write_report(report, c.out_path);
    std::cout << refchoice::render_report(report);
    return fit.converged ? kExitOk : kExitEstimation;
}

int run_fit_twostep(const CommonOptions& c, double grid_step, double init_fraction) {
    refchoice::ChoicePanel panel = refchoice::read_panel(c.panel_path);
    refchoice::ModelSpec spec{panel.brands(), c.segments};
    refchoice::TwoStepConfig config{refchoice::make_grid(grid_step), init_fraction};
    refchoice::GridSearchResult res =
        refchoice::grid_search(panel, config, spec, fit_options(c));
    refchoice::FitReport report =
        refchoice::make_report(res.best, spec.brands, spec.segments, "twostep");
    report.wall_time_s = res.wall_time_s;
    report.twostep =
        refchoice::TwoStepSummary{res.pi_hat, init_fraction, res.grid, res.logliks};
    refchoice::write_report(report, c.out_path);
    std::cout << refchoice::render_report(report);
    return res.best.converged ? kExitOk : kExitEstimation;
}

int run_compare(const CommonOptions& c, double grid_step, double init_fraction) {
    refchoice::ChoicePanel panel = refchoice::read_panel(c.panel_path);
    refchoice::ModelSpec spec{panel.brands(), c.segments};

    refchoice::FitResult joint = refchoice::fit(panel, spec, fit_options(c));
    refchoice::TwoStepConfig config{refchoice::make_grid(grid_step), init_fraction};
    refchoice::GridSearchResult twostep =
        refchoice::grid_search(panel, config, spec, fit_options(c));

    // Both parameter sets re-scored on the full panel so the comparison
    // is apples-to-apples; the two-step fit itself only ever saw the
    // calibration periods.
    refchoice::MixtureLoglikOptions lopts;
    lopts.threads = c.threads;
    double joint_full = refchoice::mixture_loglik(panel, joint.parameters, lopts);
    double twostep_full = refchoice::mixture_loglik(panel, twostep.best.parameters, lopts);
    double speed_ratio = twostep.wall_time_s / std::max(joint.wall_time_s, 1e-9);

    refchoice::FitReport joint_report =
        refchoice::make_report(joint, spec.brands, spec.segments, "joint");
    refchoice::FitReport twostep_report =
        refchoice::make_report(twostep.best, spec.brands, spec.segments, "twostep");
    twostep_report.wall_time_s = twostep.wall_time_s;
    twostep_report.twostep =
        refchoice::TwoStepSummary{twostep.pi_hat, init_fraction, twostep.grid, twostep.logliks};

    refchoice::json out = {
        {"schema", refchoice::kCompareReportSchema},
        {"joint", refchoice::report_to_json(joint_report)},
        {"twostep", refchoice::report_to_json(twostep_report)},
        {"joint_full_panel_loglik", joint_full},
        {"twostep_full_panel_loglik", twostep_full},
        {"joint_wall_time_s", joint.wall_time_s},
        {"twostep_wall_time_s", twostep.wall_time_s},
        {"speed_ratio", speed_ratio},
        {"note", "full-panel log-likelihoods re-score both fitted parameter sets on all "
                 "periods; the two-step fit was estimated on calibration periods only"}};
    refchoice::detail::write_file(c.out_path, out.dump(2) + "\n");

    std::cout << "joint fit:     loglik(full panel) = " << joint_full << ", wall time "
              << joint.wall_time_s << " s\n";
    std::cout << "  per-segment pi:";
    for (const auto& seg : joint.parameters.segments) std::cout << " " << seg.pi;
    std::cout << "\n";
    std::cout << "two-step fit:  loglik(full panel) = " << twostep_full << ", wall time "
              << twostep.wall_time_s << " s\n";
    std::cout << "  pooled pi: " << twostep.pi_hat << "\n";
    std::cout << "speed ratio (two-step / joint): " << speed_ratio << "\n";
    return (joint.converged && twostep.best.converged) ? kExitOk : kExitEstimation;
}

int run_report(const std::string& in_path) {
    refchoice::FitReport report = refchoice::read_report(in_path);
    std::cout << refchoice::render_report(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memory-based reference-price choice model estimation"};
    app.require_subcommand(1);

    CommonOptions c;
    std::string config_path;
    double grid_step = 0.01;
    double init_fraction = 0.3;
    std::string report_in;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic scanner panel");
    sim->add_option("--config", config_path, "simulation config JSON");
    auto* sim_segments = sim->add_option("--segments", c.segments, "built-in preset segment count")
                             ->default_val(3);
    auto* sim_seed = sim->add_option("--seed", c.seed, "RNG seed");
    sim->add_option("--out", c.out_path, "output prefix")->required();

    auto add_fit_flags = [&](CLI::App* cmd) {
        cmd->add_option("--panel", c.panel_path, "panel CSV")->required();
        cmd->add_option("--segments", c.segments, "latent segment count")
            ->check(CLI::Range(std::size_t{1}, std::size_t{16}))
            ->default_val(1);
        cmd->add_option("--seed", c.seed, "RNG seed for multistart");
        cmd->add_option("--starts", c.starts, "multistart count");
        cmd->add_option("--threads", c.threads, "worker threads");
        cmd->add_option("--out", c.out_path, "output report path")->required();
    };
    auto* fit_cmd = app.add_subcommand("fit", "joint maximum likelihood fit");
    add_fit_flags(fit_cmd);

    auto* ts_cmd = app.add_subcommand("fit-twostep", "legacy grid-search two-step fit");
    add_fit_flags(ts_cmd);
    ts_cmd->add_option("--grid-step", grid_step, "carry-over grid step");
    ts_cmd->add_option("--init-fraction", init_fraction, "initialization sample fraction");

    auto* cmp_cmd = app.add_subcommand("compare", "joint vs two-step side-by-side");
    add_fit_flags(cmp_cmd);
    cmp_cmd->add_option("--grid-step", grid_step, "carry-over grid step");
    cmp_cmd->add_option("--init-fraction", init_fraction, "initialization sample fraction");

    auto* rep_cmd = app.add_subcommand("report", "render a report file as text");
    rep_cmd->add_option("--in", report_in, "report JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return run_simulate(config_path, c, sim_seed->count() > 0, sim_segments->count() > 0);
        if (fit_cmd->parsed()) return run_fit(c);
        if (ts_cmd->parsed()) return run_fit_twostep(c, grid_step, init_fraction);
        if (cmp_cmd->parsed()) return run_compare(c, grid_step, init_fraction);
        if (rep_cmd->parsed()) return run_report(report_in);
    } catch (const refchoice::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const refchoice::ParseError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "estimation error: " << e.what() << "\n";
        return kExitEstimation;
    }
    return kExitOk;
}
