#pragma once

#include <stdexcept>

#include "refchoice/datagen.hpp"

namespace refchoice {

// Built-in generator truths for synthetic panels. The three-segment one
// reproduces the published cola-category estimates; the one- and
// two-segment ones are desk-scale defaults with loss coefficients above
// gain coefficients.

inline MixtureParameters preset_one_segment() {
    MixtureParameters mix;
    mix.segments.push_back({0.40, 0.5, 0.6, {0.4, 0.2, 0.1}, 0.8, 2.0, -1.5});
    mix.psi = {1.0};
    return mix;
}

inline MixtureParameters preset_two_segment() {
    MixtureParameters mix;
    mix.segments.push_back({0.10, 0.8, 0.5, {0.5, 0.3, 0.2}, 1.5, 3.5, -1.8});
    mix.segments.push_back({0.65, 0.2, 0.7, {0.2, 0.5, 0.4}, 1.0, 4.0, -1.2});
    mix.psi = {0.4, 0.6};
    return mix;
}

inline MixtureParameters preset_three_segment() {
    MixtureParameters mix;
    mix.segments.push_back(
        {0.0770, 5.7656, 3.9185, {3.2919, 6.5073, 6.2598}, 0.8500, 1.1160, -4.8143});
    mix.segments.push_back(
        {0.2894, 0.5000, 0.7858, {1.0472, 0.6386, 0.6493}, 0.6966, 7.4963, -10.5571});
    mix.segments.push_back(
        {0.6628, 1.0497, 7.0767, {0.7575, 1.8804, 0.7543}, 0.7511, 6.9011, -9.8313});
    mix.psi = {0.0905, 0.4444, 0.4651};
    return mix;
}

// Pooled carry-over weight reported by the legacy two-step procedure on
// the same data set.
constexpr double kTwoStepPooledPi = 0.8315;

inline MixtureParameters preset_mixture(std::size_t segments) {
    switch (segments) {
        case 1: return preset_one_segment();
        case 2: return preset_two_segment();
        case 3: return preset_three_segment();
        default: throw std::invalid_argument("no built-in preset for this segment count");
    }
}

inline SimulationSpec default_sim_spec(std::size_t segments, std::uint64_t seed) {
    SimulationSpec spec;
    spec.households = 350;
    spec.periods = 104;
    spec.brands = 4;
    spec.seed = seed;
    spec.price.base_price = {2.5, 2.3, 2.1, 1.9};
    spec.price.promo_probability = 0.35;
    spec.price.promo_depth = 0.3;
    spec.price.noise_sd = 0.08;
    spec.price.shared_prices = true;
    spec.mix = preset_mixture(segments);
    return spec;
}

}  // namespace refchoice
