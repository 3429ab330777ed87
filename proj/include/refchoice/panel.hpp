#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace refchoice {

// One price path: a T x K matrix of strictly positive prices, row-major.
// Households referencing the same path share it (store-level pricing).
struct PricePath {
    std::size_t periods = 0;
    std::size_t brands = 0;
    std::vector<double> prices;  // periods * brands

    double at(std::size_t t, std::size_t j) const { return prices[t * brands + j]; }
    double& at(std::size_t t, std::size_t j) { return prices[t * brands + j]; }

    // Price series of one brand over all periods.
    std::vector<double> brand_series(std::size_t j) const {
        std::vector<double> s(periods);
        for (std::size_t t = 0; t < periods; ++t) s[t] = at(t, j);
        return s;
    }
};

// Per-period outcome: 0 = no purchase, 1..K = chosen brand.
struct Household {
    std::size_t path = 0;           // index into ChoicePanel::paths
    std::vector<int> outcomes;      // length = path's periods
};

struct ChoicePanel {
    std::vector<PricePath> paths;
    std::vector<Household> households;

    std::size_t brands() const { return paths.empty() ? 0 : paths[0].brands; }

    void validate() const {
        for (const auto& path : paths) {
            if (path.brands < 1 || path.periods < 1 ||
                path.prices.size() != path.periods * path.brands)
                throw std::invalid_argument("panel: malformed price path");
            for (double p : path.prices)
                if (!(p > 0.0)) throw std::invalid_argument("panel: non-positive price");
        }
        for (const auto& h : households) {
            if (h.path >= paths.size())
                throw std::invalid_argument("panel: dangling path index");
            const auto& path = paths[h.path];
            if (h.outcomes.size() != path.periods)
                throw std::invalid_argument("panel: outcome length mismatch");
            for (int y : h.outcomes)
                if (y < 0 || static_cast<std::size_t>(y) > path.brands)
                    throw std::invalid_argument("panel: outcome out of range");
        }
    }
};

}  // namespace refchoice
