#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "refchoice/panel.hpp"
#include "refchoice/refprice.hpp"

namespace refchoice {

constexpr double kDefaultEpsilon = 1e-6;

// Parameters of one latent segment. The benchmark brand is the one with
// the highest index; its intercept is identically zero and never appears
// in brand_intercepts (which holds the K-1 free intercepts).
struct SegmentParameters {
    double pi = 0.0;
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    std::vector<double> brand_intercepts;  // size K-1
    double beta_g = 0.0;
    double beta_l = 0.0;
    double beta_p = 0.0;

    std::size_t brand_count() const { return brand_intercepts.size() + 1; }

    // j is 0-based; the last brand is the benchmark.
    double intercept(std::size_t j) const {
        return j < brand_intercepts.size() ? brand_intercepts[j] : 0.0;
    }
};

struct MixtureParameters {
    std::vector<SegmentParameters> segments;
    std::vector<double> psi;  // simplex, same length as segments

    std::size_t segment_count() const { return segments.size(); }

    void validate() const {
        if (segments.empty() || psi.size() != segments.size())
            throw std::invalid_argument("mixture: segment/share count mismatch");
        double total = 0.0;
        for (double w : psi) {
            if (!(w > 0.0)) throw std::invalid_argument("mixture: shares must be positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("mixture: shares must sum to 1");
        for (std::size_t s = 1; s < segments.size(); ++s)
            if (segments[s].brand_count() != segments[0].brand_count())
                throw std::invalid_argument("mixture: inconsistent brand counts");
    }
};

// u = beta_j + beta_p * p + (r - p) * (beta_g if r > p else beta_l),
// with r the closed-form reference price of the brand at period t (1-based).
inline double utility_branch(const SegmentParameters& seg, std::span<const double> brand_prices,
                             std::size_t t, std::size_t brand_index) {
    double p = brand_prices[t - 1];
    double r = reference_closed_form(brand_prices, seg.pi, t);
    Deviation d = gain_loss(r, p);
    double coef = d.is_gain ? seg.beta_g : seg.beta_l;
    return seg.intercept(brand_index) + seg.beta_p * p + d.value * coef;
}

// Heaviside form: the gain/loss coefficient is written as
// beta_g^H(r - p - eps) * beta_l^H(-(r - p)). Agrees with utility_branch
// whenever |r - p| > eps; inside the eps band the gain exponent is 0.
inline double utility_heaviside(const SegmentParameters& seg, std::span<const double> brand_prices,
                                std::size_t t, std::size_t brand_index,
                                double eps = kDefaultEpsilon) {
    double p = brand_prices[t - 1];
    double r = reference_closed_form(brand_prices, seg.pi, t);
    double dev = r - p;
    int hg = heaviside(dev - eps);
    int hl = heaviside(-dev);
    double coef = (hg ? seg.beta_g : 1.0) * (hl ? seg.beta_l : 1.0);
    return seg.intercept(brand_index) + seg.beta_p * p + dev * coef;
}

// Max-shifted softmax; sums to 1 within 1e-12 for finite inputs.
inline std::vector<double> brand_probabilities(std::span<const double> utilities) {
    if (utilities.size() < 2)
        throw std::invalid_argument("brand_probabilities: need K >= 2");
    double umax = *std::max_element(utilities.begin(), utilities.end());
    std::vector<double> prob(utilities.size());
    double total = 0.0;
    for (std::size_t k = 0; k < utilities.size(); ++k) {
        prob[k] = std::exp(utilities[k] - umax);
        total += prob[k];
    }
    for (double& v : prob) v /= total;
    return prob;
}

// Category value CV = log sum_k exp(u_k), max-shifted.
inline double category_value(std::span<const double> utilities) {
    if (utilities.empty())
        throw std::invalid_argument("category_value: empty utilities");
    double umax = *std::max_element(utilities.begin(), utilities.end());
    double total = 0.0;
    for (double u : utilities) total += std::exp(u - umax);
    return umax + std::log(total);
}

// log(1 / (1 + exp(-z))), computed without overflow.
inline double log_logistic(double z) {
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// Pr(purchase) = exp(a0 + a1*cv) / (1 + exp(a0 + a1*cv)).
inline double incidence_probability(double alpha0, double alpha1, double cv) {
    return std::exp(log_logistic(alpha0 + alpha1 * cv));
}

// All K segment-conditional utilities at period t (1-based).
inline std::vector<double> segment_utilities(const SegmentParameters& seg, const PricePath& path,
                                             std::size_t t) {
    std::vector<double> u(path.brands);
    for (std::size_t j = 0; j < path.brands; ++j)
        u[j] = utility_branch(seg, path.brand_series(j), t, j);
    return u;
}

// Pr(j and purchase) = Pr(j | purchase) * Pr(purchase).
inline double joint_probability(const SegmentParameters& seg, const PricePath& path,
                                std::size_t t, std::size_t brand_index) {
    if (brand_index >= path.brands)
        throw std::invalid_argument("joint_probability: brand index out of range");
    auto u = segment_utilities(seg, path, t);
    double cv = category_value(u);
    auto prob = brand_probabilities(u);
    return prob[brand_index] * incidence_probability(seg.alpha0, seg.alpha1, cv);
}

// Segment-share weighted joint probability.
inline double mixture_probability(const MixtureParameters& mix, const PricePath& path,
                                  std::size_t t, std::size_t brand_index) {
    mix.validate();
    double total = 0.0;
    for (std::size_t s = 0; s < mix.segments.size(); ++s)
        total += mix.psi[s] * joint_probability(mix.segments[s], path, t, brand_index);
    return total;
}

}  // namespace refchoice
