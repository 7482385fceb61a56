#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "pmrank/common.hpp"

namespace pmrank {

// Small discrete search problems used as an exact oracle for the optimality
// of the index policy. Kept deliberately tiny: the full DP enumerates every
// (searched-set, best-so-far) state.
struct DiscreteBox {
    VecD values;
    VecD probs;
    double cost = 0.0;

    void validate() const {
        if (values.empty() || values.size() != probs.size())
            throw ConfigError("discrete box needs matching values/probs");
        if (values.size() > 6) throw ConfigError("discrete box supports at most 6 points");
        double total = 0.0;
        for (double p : probs) {
            if (p < 0.0) throw ConfigError("negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("probabilities must sum to 1");
        if (cost < 0.0) throw ConfigError("negative search cost");
    }

    double expected_value() const {
        double e = 0.0;
        for (std::size_t p = 0; p < values.size(); ++p) e += values[p] * probs[p];
        return e;
    }

    // Marginal benefit of the discrete box is piecewise linear:
    //   G(w) = sum_p probs[p] * max(values[p] - w, 0)
    double marginal_benefit(double w) const {
        double g = 0.0;
        for (std::size_t p = 0; p < values.size(); ++p)
            g += probs[p] * std::max(values[p] - w, 0.0);
        return g;
    }

    // Exact reservation value: G is piecewise linear with knots at the
    // support points, so G(w) = cost is solved by segment interpolation.
    // cost = 0 gives the max support point (G vanishes there).
    double reservation() const {
        VecD v = values;
        std::sort(v.begin(), v.end(), std::greater<double>());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        if (cost <= 0.0) return v.front();
        for (std::size_t k = 1; k < v.size(); ++k) {
            const double g_here = marginal_benefit(v[k]);
            if (g_here >= cost) {  // crossed inside segment [v[k], v[k-1]]
                const double g_above = marginal_benefit(v[k - 1]);
                const double slope = (g_above - g_here) / (v[k - 1] - v[k]);
                return v[k] + (cost - g_here) / slope;
            }
        }
        // below the lowest support point, G(w) = E[v] - w exactly
        return expected_value() - cost;
    }
};

struct DiscreteSearchInstance {
    double outside = 0.0;
    std::vector<DiscreteBox> boxes;

    void validate() const {
        if (boxes.empty() || boxes.size() > 4)
            throw ConfigError("instance must have 1..4 boxes");
        for (const auto& b : boxes) b.validate();
    }
};

namespace detail {

struct PandoraDp {
    const DiscreteSearchInstance& inst;
    VecD best_values;  // sorted unique candidate "best so far" levels
    std::map<std::pair<unsigned, int>, double> memo;

    explicit PandoraDp(const DiscreteSearchInstance& instance) : inst(instance) {
        best_values.push_back(inst.outside);
        for (const auto& b : inst.boxes)
            for (double v : b.values) best_values.push_back(v);
        std::sort(best_values.begin(), best_values.end());
        best_values.erase(std::unique(best_values.begin(), best_values.end()),
                          best_values.end());
    }

    int level_of(double v) const {
        const auto it = std::lower_bound(best_values.begin(), best_values.end(), v);
        return static_cast<int>(std::distance(best_values.begin(), it));
    }

    // optimal expected net utility over ALL policies
    double optimal(unsigned mask, int best_idx) {
        const auto key = std::make_pair(mask, best_idx);
        const auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        const double best = best_values[best_idx];
        double value = best;  // stopping now
        for (std::size_t k = 0; k < inst.boxes.size(); ++k) {
            if (mask & (1u << k)) continue;
            const auto& box = inst.boxes[k];
            double cont = -box.cost;
            for (std::size_t p = 0; p < box.values.size(); ++p)
                cont += box.probs[p] *
                        optimal(mask | (1u << k), level_of(std::max(best, box.values[p])));
            value = std::max(value, cont);
        }
        memo[key] = value;
        return value;
    }
};

}  // namespace detail

// Exact optimal value by backward induction over all search policies.
inline double brute_force_policy_value(const DiscreteSearchInstance& inst) {
    inst.validate();
    detail::PandoraDp dp(inst);
    return dp.optimal(0u, dp.level_of(inst.outside));
}

// Exact expected value of the Weitzman index policy on the same instance:
// search the unsearched box with the highest reservation value while it
// exceeds the best utility in hand, then stop.
inline double index_policy_value(const DiscreteSearchInstance& inst) {
    inst.validate();
    VecD reservations(inst.boxes.size());
    for (std::size_t k = 0; k < inst.boxes.size(); ++k)
        reservations[k] = inst.boxes[k].reservation();

    std::function<double(unsigned, double)> walk = [&](unsigned mask, double best) -> double {
        int pick = -1;
        double r_best = -1e300;
        for (std::size_t k = 0; k < inst.boxes.size(); ++k) {
            if (mask & (1u << k)) continue;
            if (reservations[k] > r_best + 1e-15 ||
                (std::abs(reservations[k] - r_best) <= 1e-15 && pick < 0)) {
                r_best = reservations[k];
                pick = static_cast<int>(k);
            }
        }
        if (pick < 0 || best >= r_best) return best;  // stopping rule
        const auto& box = inst.boxes[pick];
        double value = -box.cost;
        for (std::size_t p = 0; p < box.values.size(); ++p)
            value += box.probs[p] * walk(mask | (1u << pick), std::max(best, box.values[p]));
        return value;
    };
    return walk(0u, inst.outside);
}

}  // namespace pmrank
