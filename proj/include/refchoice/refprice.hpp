#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace refchoice {

// Memory-based reference prices.
//
// A brand's reference price is an exponentially weighted average of its
// past prices. Two equivalent evaluations are provided: the O(T) recursion
// over the whole series, and a direct-summation closed form for a single
// period. They are provably equal; tests cross-check them.

inline void check_carryover(double pi) {
    if (!(pi >= 0.0 && pi <= 1.0))
        throw std::invalid_argument("carry-over weight must lie in [0, 1]");
}

// r[0] = p[0]; r[t] = pi * r[t-1] + (1 - pi) * p[t-1].
inline std::vector<double> reference_iterative(std::span<const double> prices, double pi) {
    check_carryover(pi);
    if (prices.empty())
        throw std::invalid_argument("reference_iterative: empty price series");
    std::vector<double> ref(prices.size());
    ref[0] = prices[0];
    for (std::size_t t = 1; t < prices.size(); ++t)
        ref[t] = pi * ref[t - 1] + (1.0 - pi) * prices[t - 1];
    return ref;
}

// Direct summation for one period (1-based t):
//   r_t = pi^(t-1) * p_1 + (1 - pi) * sum_{i=1}^{t-1} pi^(i-1) * p_{t-i}.
// The pi powers are built by repeated multiplication so the equivalence
// with the recursion stays tight in floating point.
inline double reference_closed_form(std::span<const double> prices, double pi, std::size_t t) {
    check_carryover(pi);
    if (t < 1 || t > prices.size())
        throw std::invalid_argument("reference_closed_form: period index out of range");
    double w = 1.0;  // pi^(i-1), ends the loop as pi^(t-1)
    double sum = 0.0;
    for (std::size_t i = 1; i <= t - 1; ++i) {
        sum += w * prices[t - i - 1];
        w *= pi;
    }
    return w * prices[0] + (1.0 - pi) * sum;
}

// Signed deviation (r - p) plus the branch it falls in. r > p is a gain;
// r <= p (including equality) is a loss, where the contribution is <= 0.
struct Deviation {
    bool is_gain;
    double value;  // r - p, signed
};

inline Deviation gain_loss(double r, double p) {
    return {r > p, r - p};
}

// H(x) = 1 for x > 0, else 0. The tie at exactly 0 goes to 0, which puts
// r = p in the loss branch.
inline int heaviside(double x) {
    return x > 0.0 ? 1 : 0;
}

}  // namespace refchoice
