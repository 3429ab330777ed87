#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "refchoice/choicemodel.hpp"
#include "refchoice/likelihood.hpp"
#include "refchoice/panel.hpp"
#include "refchoice/rng.hpp"

namespace refchoice {

// Synthetic scanner panels drawn from known MixtureParameters, so every
// estimator claim can be scored against a recorded truth.

struct PriceProcessConfig {
    std::vector<double> base_price;   // one per brand, > 0
    double promo_probability = 0.3;   // per (period, brand)
    double promo_depth = 0.2;         // fractional discount in (0,1)
    double noise_sd = 0.0;            // multiplicative log-normal jitter
    bool shared_prices = true;        // one store-level path vs per household

    void validate(std::size_t brands) const {
        if (base_price.size() != brands)
            throw std::invalid_argument("price config: base_price count != brands");
        for (double b : base_price)
            if (!(b > 0.0)) throw std::invalid_argument("price config: base price must be > 0");
        if (!(promo_probability >= 0.0 && promo_probability <= 1.0))
            throw std::invalid_argument("price config: promo_probability must lie in [0,1]");
        if (!(promo_depth >= 0.0 && promo_depth < 1.0))
            throw std::invalid_argument("price config: promo_depth must lie in [0,1)");
        if (!(noise_sd >= 0.0))
            throw std::invalid_argument("price config: noise_sd must be >= 0");
    }
};

struct SimulationSpec {
    std::size_t households = 350;
    std::size_t periods = 104;
    std::size_t brands = 4;
    MixtureParameters mix;
    PriceProcessConfig price;
    std::uint64_t seed = 1;

    void validate() const {
        if (households < 1 || periods < 2 || brands < 2)
            throw std::invalid_argument("simulation spec: need N >= 1, T >= 2, K >= 2");
        mix.validate();
        if (mix.segments[0].brand_count() != brands)
            throw std::invalid_argument("simulation spec: mixture brand count != brands");
        price.validate(brands);
    }
};

// price = base * (1 - depth * promo) * exp(noise_sd * z).
inline PricePath simulate_prices(const SimulationSpec& spec, std::uint64_t stream) {
    PricePath path;
    path.periods = spec.periods;
    path.brands = spec.brands;
    path.prices.resize(spec.periods * spec.brands);
    SplitMix64 rng(derive_seed(spec.seed, stream));
    for (std::size_t t = 0; t < spec.periods; ++t)
        for (std::size_t j = 0; j < spec.brands; ++j) {
            bool promo = rng.uniform() < spec.price.promo_probability;
            double jitter = spec.price.noise_sd > 0.0
                                ? std::exp(spec.price.noise_sd * rng.gaussian())
                                : 1.0;
            path.at(t, j) =
                spec.price.base_price[j] * (1.0 - (promo ? spec.price.promo_depth : 0.0)) * jitter;
        }
    return path;
}

// Each household draws its segment once from psi, then per period draws
// purchase incidence and, conditionally, a brand from the model
// probabilities. Categorical sampling from the model probabilities is
// distributionally identical to Gumbel-perturbed utilities for logit.
// Per-household seed streams make generation order-independent.
inline ChoicePanel simulate_panel(const SimulationSpec& spec) {
    spec.validate();
    ChoicePanel panel;
    if (spec.price.shared_prices) {
        panel.paths.push_back(simulate_prices(spec, 0));
    } else {
        for (std::size_t i = 0; i < spec.households; ++i)
            panel.paths.push_back(simulate_prices(spec, i));
    }

    const std::size_t S = spec.mix.segments.size();
    // Outcome probabilities per (path, segment, period), reused across
    // households on the same path.
    std::vector<std::vector<std::vector<double>>> probs(panel.paths.size());
    for (std::size_t p = 0; p < panel.paths.size(); ++p) {
        probs[p].resize(S);
        for (std::size_t s = 0; s < S; ++s) {
            OutcomeLogProbs table = outcome_log_probs(panel.paths[p], spec.mix.segments[s]);
            auto& flat = probs[p][s];
            flat.resize(table.values.size());
            for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = std::exp(table.values[i]);
        }
    }

    panel.households.resize(spec.households);
    for (std::size_t i = 0; i < spec.households; ++i) {
        Household& h = panel.households[i];
        h.path = spec.price.shared_prices ? 0 : i;
        h.outcomes.resize(spec.periods);
        SplitMix64 rng(derive_seed(spec.seed, 1000003 + i));

        // Segment draw.
        double u = rng.uniform();
        std::size_t seg = S - 1;
        double cum = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            cum += spec.mix.psi[s];
            if (u < cum) {
                seg = s;
                break;
            }
        }

        const auto& flat = probs[h.path][seg];
        const std::size_t K = spec.brands;
        for (std::size_t t = 0; t < spec.periods; ++t) {
            double p_nopurchase = flat[t * (K + 1)];
            if (rng.uniform() < p_nopurchase) {
                h.outcomes[t] = 0;
                continue;
            }
            // Brand draw conditional on purchase.
            double total = 0.0;
            for (std::size_t j = 0; j < K; ++j) total += flat[t * (K + 1) + 1 + j];
            double v = rng.uniform() * total;
            std::size_t brand = K - 1;
            double acc = 0.0;
            for (std::size_t j = 0; j < K; ++j) {
                acc += flat[t * (K + 1) + 1 + j];
                if (v < acc) {
                    brand = j;
                    break;
                }
            }
            h.outcomes[t] = static_cast<int>(brand + 1);
        }
    }
    return panel;
}

}  // namespace refchoice
