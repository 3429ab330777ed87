#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "refchoice/likelihood.hpp"
#include "refchoice/optim.hpp"
#include "refchoice/rng.hpp"

namespace refchoice {

// |z| above which a two-sided normal test rejects at the 0.01 level.
constexpr double kDefaultSignificanceLevel = 0.01;

struct ModelSpec {
    std::size_t brands = 4;
    std::size_t segments = 1;
    double eps = kDefaultEpsilon;
};

// Maps MixtureParameters to a flat unconstrained vector and back.
// Per segment: [logit(pi) if free, alpha0, alpha1, K-1 intercepts,
// beta_g, beta_l, beta_p]; then S-1 share logits (last share reference).
// A pinned pi (two-step baseline) drops the logit(pi) slot of every
// segment.
struct ParameterLayout {
    std::size_t brands = 0;
    std::size_t segments = 0;
    std::optional<double> pinned_pi;

    bool pi_free() const { return !pinned_pi.has_value(); }
    std::size_t per_segment() const { return (pi_free() ? 1 : 0) + 2 + (brands - 1) + 3; }
    std::size_t size() const { return segments * per_segment() + (segments - 1); }
};

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clamp_unit(double p, bool* clamped = nullptr) {
    constexpr double lo = 1e-8;
    if (p < lo || p > 1.0 - lo) {
        if (clamped) *clamped = true;
        return std::min(std::max(p, lo), 1.0 - lo);
    }
    return p;
}

inline std::vector<double> pack(const MixtureParameters& mix, const ParameterLayout& layout,
                                bool* clamped = nullptr) {
    mix.validate();
    std::vector<double> v;
    v.reserve(layout.size());
    for (const auto& seg : mix.segments) {
        if (layout.pi_free()) v.push_back(logit(clamp_unit(seg.pi, clamped)));
        v.push_back(seg.alpha0);
        v.push_back(seg.alpha1);
        for (double b : seg.brand_intercepts) v.push_back(b);
        v.push_back(seg.beta_g);
        v.push_back(seg.beta_l);
        v.push_back(seg.beta_p);
    }
    for (std::size_t s = 0; s + 1 < mix.psi.size(); ++s)
        v.push_back(std::log(mix.psi[s] / mix.psi.back()));
    return v;
}

inline MixtureParameters unpack(std::span<const double> v, const ParameterLayout& layout) {
    if (v.size() != layout.size())
        throw std::invalid_argument("unpack: vector length mismatch");
    MixtureParameters mix;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < layout.segments; ++s) {
        SegmentParameters seg;
        seg.pi = layout.pi_free() ? 1.0 / (1.0 + std::exp(-v[pos++])) : *layout.pinned_pi;
        seg.alpha0 = v[pos++];
        seg.alpha1 = v[pos++];
        seg.brand_intercepts.assign(v.begin() + pos, v.begin() + pos + (layout.brands - 1));
        pos += layout.brands - 1;
        seg.beta_g = v[pos++];
        seg.beta_l = v[pos++];
        seg.beta_p = v[pos++];
        mix.segments.push_back(std::move(seg));
    }
    // Softmax over [share logits, 0], max-shifted.
    std::vector<double> logits(v.begin() + pos, v.end());
    logits.push_back(0.0);
    double lmax = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& l : logits) {
        l = std::exp(l - lmax);
        total += l;
    }
    mix.psi.resize(layout.segments);
    for (std::size_t s = 0; s < layout.segments; ++s) mix.psi[s] = logits[s] / total;
    // Floor shares so extreme logits still yield a valid simplex.
    double renorm = 0.0;
    for (double& w : mix.psi) {
        w = std::max(w, 1e-12);
        renorm += w;
    }
    for (double& w : mix.psi) w /= renorm;
    return mix;
}

// Segments ordered by ascending pi, ties broken by ascending beta_p;
// psi permuted identically. Resolves mixture label switching.
inline MixtureParameters canonicalize_segments(const MixtureParameters& mix) {
    std::vector<std::size_t> order(mix.segments.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mix.segments[a].pi != mix.segments[b].pi)
            return mix.segments[a].pi < mix.segments[b].pi;
        return mix.segments[a].beta_p < mix.segments[b].beta_p;
    });
    MixtureParameters out;
    for (std::size_t idx : order) {
        out.segments.push_back(mix.segments[idx]);
        out.psi.push_back(mix.psi[idx]);
    }
    return out;
}

// Constrained-scale parameter report: one named value per estimable
// quantity, in canonical order (per segment, then the shares).
struct ParameterTable {
    std::vector<std::string> names;
    std::vector<double> estimates;
    std::vector<bool> fixed;  // pinned pi, or psi when S = 1
};

inline ParameterTable parameter_table(const MixtureParameters& mix, const ParameterLayout& layout) {
    ParameterTable t;
    for (std::size_t s = 0; s < mix.segments.size(); ++s) {
        const auto& seg = mix.segments[s];
        auto tag = [&](const std::string& n) { return "segment" + std::to_string(s + 1) + "." + n; };
        auto push = [&](const std::string& n, double val, bool fix) {
            t.names.push_back(tag(n));
            t.estimates.push_back(val);
            t.fixed.push_back(fix);
        };
        push("pi", seg.pi, !layout.pi_free());
        push("alpha0", seg.alpha0, false);
        push("alpha1", seg.alpha1, false);
        for (std::size_t j = 0; j < seg.brand_intercepts.size(); ++j)
            push("intercept_" + std::to_string(j + 1), seg.brand_intercepts[j], false);
        push("beta_g", seg.beta_g, false);
        push("beta_l", seg.beta_l, false);
        push("beta_p", seg.beta_p, false);
    }
    // With a single segment psi = 1 is implicit and gets no row.
    if (mix.psi.size() > 1) {
        for (std::size_t s = 0; s < mix.psi.size(); ++s) {
            t.names.push_back("psi_" + std::to_string(s + 1));
            t.estimates.push_back(mix.psi[s]);
            t.fixed.push_back(false);
        }
    }
    return t;
}

struct FitOptions {
    int starts = 8;
    std::uint64_t seed = 1;
    int threads = 1;
    int max_iterations = 600;
    double tol_objective = 1e-9;
    double tol_gradient = 1e-5;
    std::optional<double> pinned_pi;
    std::vector<std::size_t> t_begin;  // per household; empty = full panel
};

struct StandardErrors {
    std::vector<double> se;          // aligned with ParameterTable
    std::vector<bool> available;
    bool hessian_positive_definite = false;
};

struct FitResult {
    MixtureParameters parameters;
    ParameterTable table;
    StandardErrors std_errors;
    std::vector<bool> significant;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    double wall_time_s = 0.0;
    int n_starts = 0;
    long floor_events = 0;
    double grad_norm = 0.0;
};

namespace detail {

inline Objective make_objective(const ChoicePanel& panel, const ParameterLayout& layout,
                                const FitOptions& opts) {
    return [&panel, layout, &opts](std::span<const double> v) -> double {
        MixtureLoglikOptions lopts;
        lopts.threads = opts.threads;
        lopts.t_begin = opts.t_begin;
        double ll = mixture_loglik(panel, unpack(v, layout), lopts);
        return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    };
}

// Per-household loglik under one segment, likelihood periods restricted
// by t_begin (1-based; empty = full history).
inline std::vector<double> per_household_loglik(const ChoicePanel& panel,
                                                const SegmentParameters& seg,
                                                std::span<const std::size_t> t_begin) {
    std::vector<OutcomeLogProbs> tables(panel.paths.size());
    for (std::size_t p = 0; p < panel.paths.size(); ++p)
        tables[p] = outcome_log_probs(panel.paths[p], seg);
    std::vector<double> out(panel.households.size());
    for (std::size_t i = 0; i < panel.households.size(); ++i) {
        const Household& h = panel.households[i];
        std::size_t first = t_begin.empty() ? 1 : t_begin[i];
        double total = 0.0;
        for (std::size_t t = first - 1; t < h.outcomes.size(); ++t)
            total += tables[h.path].at(t, h.outcomes[t]);
        out[i] = total;
    }
    return out;
}

// Latent-class EM refinement: alternates posterior segment weights with
// weighted per-segment ascent steps. Monotone in the mixture loglik, so
// it reliably escapes the collapsed-segment region before the joint
// quasi-Newton polish takes over.
inline MixtureParameters em_refine(const ChoicePanel& panel, MixtureParameters mix,
                                   const ParameterLayout& layout, const FitOptions& opts,
                                   int max_em_iterations = 150) {
    const std::size_t S = layout.segments;
    const std::size_t N = panel.households.size();
    if (S < 2) return mix;

    ParameterLayout seg_layout{layout.brands, 1, layout.pinned_pi};
    AscentOptions mopts;
    mopts.max_iterations = 30;
    mopts.tol_objective = 1e-8;
    mopts.tol_gradient = opts.tol_gradient;

    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_em_iterations; ++iter) {
        // E-step.
        std::vector<std::vector<double>> ll(S);
        for (std::size_t s = 0; s < S; ++s)
            ll[s] = per_household_loglik(panel, mix.segments[s], opts.t_begin);
        std::vector<std::vector<double>> w(S, std::vector<double>(N));
        double total_ll = 0.0;
        std::vector<double> scratch(S);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t s = 0; s < S; ++s) scratch[s] = std::log(mix.psi[s]) + ll[s][i];
            double lse = log_sum_exp(scratch);
            total_ll += lse;
            for (std::size_t s = 0; s < S; ++s) w[s][i] = std::exp(scratch[s] - lse);
        }
        if (total_ll - prev < 1e-9 * std::max(1.0, std::abs(total_ll)) && iter > 0) break;
        prev = total_ll;

        // M-step: shares.
        double renorm = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double sum = 0.0;
            for (double v : w[s]) sum += v;
            mix.psi[s] = std::max(sum / static_cast<double>(N), 1e-8);
            renorm += mix.psi[s];
        }
        for (double& v : mix.psi) v /= renorm;

        // M-step: segment parameters (partial ascent suffices).
        for (std::size_t s = 0; s < S; ++s) {
            MixtureParameters single;
            single.segments = {mix.segments[s]};
            single.psi = {1.0};
            std::vector<double> v0 = pack(single, seg_layout);
            const auto& weights = w[s];
            Objective wobj = [&](std::span<const double> v) -> double {
                MixtureParameters cand = unpack(v, seg_layout);
                std::vector<double> hh =
                    per_household_loglik(panel, cand.segments[0], opts.t_begin);
                double total = 0.0;
                for (std::size_t i = 0; i < N; ++i) total += weights[i] * hh[i];
                return std::isfinite(total) ? total
                                            : -std::numeric_limits<double>::infinity();
            };
            AscentResult r = bfgs_maximize(
                wobj, Eigen::Map<const Eigen::VectorXd>(v0.data(), v0.size()), mopts);
            std::span<const double> xr(r.x.data(), static_cast<std::size_t>(r.x.size()));
            mix.segments[s] = unpack(xr, seg_layout).segments[0];
        }
    }
    return mix;
}

inline Eigen::VectorXd random_start(const ParameterLayout& layout, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Eigen::VectorXd x(layout.size());
    std::size_t pos = 0;
    for (std::size_t s = 0; s < layout.segments; ++s) {
        if (layout.pi_free()) x[pos++] = rng.uniform(-2.0, 2.0);
        for (std::size_t k = 0; k < layout.per_segment() - (layout.pi_free() ? 1 : 0); ++k)
            x[pos++] = rng.uniform(-1.0, 1.0);
    }
    for (std::size_t s = 0; s + 1 < layout.segments; ++s) x[pos++] = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace detail

// Observed-information standard errors: inverse negative Hessian of the
// log-likelihood in the unconstrained space, delta-method-mapped through
// the unpack transform to the constrained scale.
inline StandardErrors standard_errors(const ChoicePanel& panel, const MixtureParameters& mix,
                                      const ParameterLayout& layout, const FitOptions& opts = {}) {
    Objective obj = detail::make_objective(panel, layout, opts);
    std::vector<double> vopt = pack(mix, layout);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(vopt.data(), vopt.size());
    Eigen::MatrixXd info = -numerical_hessian(obj, x, 1e-4);

    ParameterTable table = parameter_table(mix, layout);
    const std::size_t m = table.names.size();
    StandardErrors out;
    out.se.assign(m, 0.0);
    out.available.assign(m, false);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
        return out;  // not positive definite: SEs unavailable, not fabricated
    out.hessian_positive_definite = true;
    Eigen::MatrixXd cov = eig.eigenvectors() *
                          eig.eigenvalues().cwiseInverse().asDiagonal() *
                          eig.eigenvectors().transpose();

    // Numerical Jacobian of the unconstrained -> constrained map.
    auto flatten = [&](const Eigen::VectorXd& v) {
        std::span<const double> sp(v.data(), static_cast<std::size_t>(v.size()));
        return parameter_table(unpack(sp, layout), layout).estimates;
    };
    Eigen::MatrixXd jac(m, x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        auto fp = flatten(xp);
        xp[i] = x[i] - h;
        auto fm = flatten(xp);
        xp[i] = x[i];
        for (std::size_t r = 0; r < m; ++r) jac(r, i) = (fp[r] - fm[r]) / (2.0 * h);
    }
    Eigen::MatrixXd cc = jac * cov * jac.transpose();
    for (std::size_t r = 0; r < m; ++r) {
        if (table.fixed[r]) continue;
        double var = cc(r, r);
        if (std::isfinite(var) && var >= 0.0) {
            out.se[r] = std::sqrt(var);
            out.available[r] = true;
        }
    }
    return out;
}

// Two-sided normal test of H0: coefficient = 0.
inline std::vector<bool> significance_flags(std::span<const double> estimates,
                                            std::span<const double> ses,
                                            const std::vector<bool>& available,
                                            double threshold = kDefaultSignificanceLevel) {
    std::vector<bool> flags(estimates.size(), false);
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        if (!available.empty() && !available[i]) continue;
        if (!(ses[i] > 0.0)) continue;
        double z = std::abs(estimates[i] / ses[i]);
        double p = std::erfc(z / std::sqrt(2.0));
        flags[i] = p < threshold;
    }
    return flags;
}

// Multistart maximum likelihood over the unconstrained space. Start 0 is
// deterministic (all zeros); the rest are seeded draws. Best objective
// wins, ties broken by start index.
inline FitResult fit(const ChoicePanel& panel, const ModelSpec& spec, const FitOptions& opts = {},
                     const std::optional<MixtureParameters>& init = std::nullopt) {
    if (panel.households.empty()) throw std::invalid_argument("fit: empty panel");
    if (spec.segments < 1 || spec.brands < 2) throw std::invalid_argument("fit: bad model spec");
    auto t_start = std::chrono::steady_clock::now();

    ParameterLayout layout{spec.brands, spec.segments, opts.pinned_pi};
    Objective obj = detail::make_objective(panel, layout, opts);

    AscentOptions aopts;
    aopts.max_iterations = opts.max_iterations;
    aopts.tol_objective = opts.tol_objective;
    aopts.tol_gradient = opts.tol_gradient;

    AscentResult best;
    bool any_finite = false;
    int n_starts = std::max(1, opts.starts);
    for (int start = 0; start < n_starts; ++start) {
        Eigen::VectorXd x0;
        if (start == 0 && init) {
            std::vector<double> v = pack(*init, layout);
            x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
        } else if (start == 0) {
            x0 = Eigen::VectorXd::Zero(layout.size());
        } else {
            x0 = detail::random_start(layout, derive_seed(opts.seed, start));
        }
        if (spec.segments > 1) {
            std::span<const double> sp(x0.data(), static_cast<std::size_t>(x0.size()));
            MixtureParameters refined = detail::em_refine(panel, unpack(sp, layout), layout, opts);
            std::vector<double> v = pack(refined, layout);
            x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
        }
        AscentResult r = bfgs_maximize(obj, x0, aopts);
        if (std::isfinite(r.value)) any_finite = true;
        if (r.value > best.value) best = r;
    }
    if (!any_finite)
        throw std::runtime_error("fit: objective non-finite at every start");

    std::span<const double> xbest(best.x.data(), static_cast<std::size_t>(best.x.size()));
    MixtureParameters mix = canonicalize_segments(unpack(xbest, layout));

    FitResult res;
    res.parameters = mix;
    res.table = parameter_table(mix, layout);
    res.std_errors = standard_errors(panel, mix, layout, opts);
    res.significant = significance_flags(res.table.estimates, res.std_errors.se,
                                         res.std_errors.available);
    MixtureLoglikOptions lopts;
    lopts.threads = opts.threads;
    lopts.t_begin = opts.t_begin;
    LoglikDiagnostics diag;
    res.loglik = mixture_loglik(panel, mix, lopts, &diag);
    res.floor_events = diag.floor_events;
    res.converged = best.converged;
    res.iterations = best.iterations;
    res.n_starts = n_starts;
    res.grad_norm = best.grad_norm;
    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

}  // namespace refchoice
