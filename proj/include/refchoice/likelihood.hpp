#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "refchoice/choicemodel.hpp"
#include "refchoice/panel.hpp"

namespace refchoice {

// Per-term log-probabilities are floored here so the objective stays
// finite in extreme parameter regions; floor events are counted.
constexpr double kLogFloor = -745.0;

struct LoglikDiagnostics {
    long floor_events = 0;
};

inline double log_sum_exp(std::span<const double> values) {
    if (values.empty())
        throw std::invalid_argument("log_sum_exp: empty input");
    double vmax = *std::max_element(values.begin(), values.end());
    if (vmax == -std::numeric_limits<double>::infinity()) return vmax;
    double total = 0.0;
    for (double v : values) total += std::exp(v - vmax);
    return vmax + std::log(total);
}

namespace detail {

// Pairwise summation over a fixed-order sequence; result is independent
// of how the values were produced (thread count included).
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline void parallel_for(std::size_t n, int threads, const auto& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    };
    std::vector<std::thread> pool;
    int nthreads = std::min<int>(threads, static_cast<int>(n));
    pool.reserve(nthreads);
    for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Per-period log-probabilities of the K+1 outcomes for one price path
// under one segment. Row t holds [log Pr(no purchase), log Pr(j=1 and B),
// ..., log Pr(j=K and B)], floored at kLogFloor.
struct OutcomeLogProbs {
    std::size_t periods = 0;
    std::size_t brands = 0;
    std::vector<double> values;  // periods * (brands + 1)
    long floor_events = 0;

    double at(std::size_t t, int outcome) const {  // t 0-based
        return values[t * (brands + 1) + static_cast<std::size_t>(outcome)];
    }
};

inline OutcomeLogProbs outcome_log_probs(const PricePath& path, const SegmentParameters& seg) {
    const std::size_t T = path.periods;
    const std::size_t K = path.brands;
    OutcomeLogProbs table;
    table.periods = T;
    table.brands = K;
    table.values.resize(T * (K + 1));

    // Reference series per brand via the recursion; closed form would be
    // O(T^2) over the whole path.
    std::vector<std::vector<double>> refs(K);
    for (std::size_t j = 0; j < K; ++j)
        refs[j] = reference_iterative(path.brand_series(j), seg.pi);

    std::vector<double> u(K);
    auto floored = [&table](double lp) {
        if (lp < kLogFloor) {
            ++table.floor_events;
            return kLogFloor;
        }
        return lp;
    };
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < K; ++j) {
            double p = path.at(t, j);
            Deviation d = gain_loss(refs[j][t], p);
            double coef = d.is_gain ? seg.beta_g : seg.beta_l;
            u[j] = seg.intercept(j) + seg.beta_p * p + d.value * coef;
        }
        double cv = category_value(u);
        double z = seg.alpha0 + seg.alpha1 * cv;
        double log_buy = log_logistic(z);
        table.values[t * (K + 1)] = floored(log_logistic(-z));
        for (std::size_t j = 0; j < K; ++j)
            table.values[t * (K + 1) + 1 + j] = floored(log_buy + u[j] - cv);
    }
    return table;
}

// Log-likelihood of one household's outcome sequence under one segment,
// accumulated over periods t_begin..T (1-based, inclusive).
inline double household_segment_loglik(const ChoicePanel& panel, std::size_t household,
                                       const SegmentParameters& seg, std::size_t t_begin = 1,
                                       LoglikDiagnostics* diag = nullptr) {
    const Household& h = panel.households.at(household);
    OutcomeLogProbs table = outcome_log_probs(panel.paths[h.path], seg);
    if (diag) diag->floor_events += table.floor_events;
    double total = 0.0;
    for (std::size_t t = t_begin - 1; t < h.outcomes.size(); ++t)
        total += table.at(t, h.outcomes[t]);
    return total;
}

struct MixtureLoglikOptions {
    int threads = 1;
    // Per-household first likelihood period (1-based); empty means 1 for
    // all. Reference prices always see the full history.
    std::span<const std::size_t> t_begin = {};
};

// sum_i log sum_s exp(log psi_s + household loglik under segment s).
inline double mixture_loglik(const ChoicePanel& panel, const MixtureParameters& mix,
                             const MixtureLoglikOptions& opts = {},
                             LoglikDiagnostics* diag = nullptr) {
    mix.validate();
    const std::size_t S = mix.segments.size();
    const std::size_t P = panel.paths.size();
    const std::size_t N = panel.households.size();
    if (!opts.t_begin.empty() && opts.t_begin.size() != N)
        throw std::invalid_argument("mixture_loglik: t_begin length mismatch");

    // One outcome table per (path, segment); households index into them.
    std::vector<OutcomeLogProbs> tables(P * S);
    detail::parallel_for(P * S, opts.threads, [&](std::size_t i) {
        tables[i] = outcome_log_probs(panel.paths[i / S], mix.segments[i % S]);
    });

    std::vector<double> log_psi(S);
    for (std::size_t s = 0; s < S; ++s) log_psi[s] = std::log(mix.psi[s]);

    std::vector<double> contrib(N);
    detail::parallel_for(N, opts.threads, [&](std::size_t i) {
        const Household& h = panel.households[i];
        std::size_t first = opts.t_begin.empty() ? 1 : opts.t_begin[i];
        std::vector<double> per_seg(S);
        for (std::size_t s = 0; s < S; ++s) {
            const OutcomeLogProbs& table = tables[h.path * S + s];
            double total = 0.0;
            for (std::size_t t = first - 1; t < h.outcomes.size(); ++t)
                total += table.at(t, h.outcomes[t]);
            per_seg[s] = log_psi[s] + total;
        }
        contrib[i] = log_sum_exp(per_seg);
    });

    if (diag)
        for (const auto& table : tables) diag->floor_events += table.floor_events;
    return detail::pairwise_sum(contrib);
}

}  // namespace refchoice
