#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "pmrank/pandora_oracle.hpp"
#include "pmrank/rng.hpp"
#include "pmrank/simulate.hpp"

using namespace pmrank;

namespace {

DiscreteBox random_box(Rng& rng, int max_support, double cost_hi) {
    const int n = 2 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_support - 1));
    DiscreteBox b;
    for (int p = 0; p < n; ++p) b.values.push_back(rng.uniform(-2.0, 3.0));
    VecD raw(n);
    double total = 0.0;
    for (int p = 0; p < n; ++p) {
        raw[p] = rng.uniform(0.05, 1.0);
        total += raw[p];
    }
    for (int p = 0; p < n; ++p) b.probs.push_back(raw[p] / total);
    // put the rounding residue on the last point so the sum is exactly 1
    double acc = 0.0;
    for (int p = 0; p + 1 < n; ++p) acc += b.probs[p];
    b.probs[n - 1] = 1.0 - acc;
    b.cost = rng.uniform(0.0, cost_hi);
    return b;
}

DiscreteSearchInstance random_instance(Rng& rng, int max_boxes, int max_support) {
    DiscreteSearchInstance inst;
    inst.outside = rng.uniform(-1.0, 1.0);
    const int nb = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_boxes));
    for (int k = 0; k < nb; ++k) inst.boxes.push_back(random_box(rng, max_support, 0.8));
    return inst;
}

}  // namespace

TEST_CASE("discrete reservation solves the marginal benefit equation exactly", "[pandora]") {
    Rng rng(11);
    for (int rep = 0; rep < 100; ++rep) {
        DiscreteBox b = random_box(rng, 5, 1.0);
        if (b.cost <= 0.0) b.cost = 0.1;
        const double r = b.reservation();
        CHECK(std::abs(b.marginal_benefit(r) - b.cost) < 1e-12);
    }
}

TEST_CASE("index policy value equals the brute force optimum", "[pandora]") {
    Rng rng(2024);
    for (int rep = 0; rep < 200; ++rep) {
        const auto inst = random_instance(rng, 3, 5);
        const double dp = brute_force_policy_value(inst);
        const double ip = index_policy_value(inst);
        CHECK(std::abs(dp - ip) < 1e-10);
    }
}

TEST_CASE("zero search costs mean full search value", "[pandora]") {
    Rng rng(5);
    for (int rep = 0; rep < 30; ++rep) {
        DiscreteSearchInstance inst = random_instance(rng, 3, 4);
        for (auto& b : inst.boxes) b.cost = 0.0;
        // E[max over all boxes and the outside option]
        std::function<double(std::size_t, double)> emax = [&](std::size_t k,
                                                              double best) -> double {
            if (k == inst.boxes.size()) return best;
            double e = 0.0;
            for (std::size_t p = 0; p < inst.boxes[k].values.size(); ++p)
                e += inst.boxes[k].probs[p] * emax(k + 1, std::max(best, inst.boxes[k].values[p]));
            return e;
        };
        const double full = emax(0, inst.outside);
        CHECK(std::abs(brute_force_policy_value(inst) - full) < 1e-12);
        CHECK(std::abs(index_policy_value(inst) - full) < 1e-12);
    }
}

TEST_CASE("prohibitive search costs mean the outside value", "[pandora]") {
    Rng rng(6);
    for (int rep = 0; rep < 30; ++rep) {
        DiscreteSearchInstance inst = random_instance(rng, 3, 4);
        for (auto& b : inst.boxes) b.cost = 50.0;  // above any possible gain
        CHECK(brute_force_policy_value(inst) == inst.outside);
        CHECK(index_policy_value(inst) == inst.outside);
    }
}

TEST_CASE("instance size limits are enforced", "[pandora]") {
    DiscreteSearchInstance inst;
    for (int k = 0; k < 5; ++k) inst.boxes.push_back({{0.0, 1.0}, {0.5, 0.5}, 0.1});
    CHECK_THROWS_AS(brute_force_policy_value(inst), ConfigError);
    DiscreteBox big;
    for (int p = 0; p < 7; ++p) {
        big.values.push_back(p);
        big.probs.push_back(1.0 / 7.0);
    }
    CHECK_THROWS_AS(big.validate(), ConfigError);
}

TEST_CASE("monte carlo of the search walk matches the exact index value", "[pandora]") {
    // run_weitzman (the production selection/stopping/choice loop) on a
    // discretized instance; the simulation average must sit within three
    // standard errors of the exact index-policy value.
    Rng rng(77);
    const auto inst = random_instance(rng, 3, 4);
    VecD r(inst.boxes.size() + 1, 0.0);
    std::vector<int> ids;
    for (std::size_t k = 0; k < inst.boxes.size(); ++k) {
        ids.push_back(static_cast<int>(k + 1));
        r[k + 1] = inst.boxes[k].reservation();
    }
    const double exact = index_policy_value(inst);
    const int reps = 100000;
    double sum = 0.0, sum2 = 0.0;
    Rng draw(123);
    for (int repl = 0; repl < reps; ++repl) {
        VecD drawn(inst.boxes.size() + 1, 0.0);
        for (std::size_t k = 0; k < inst.boxes.size(); ++k) {
            double u = draw.uniform01(), acc = 0.0;
            drawn[k + 1] = inst.boxes[k].values.back();
            for (std::size_t p = 0; p < inst.boxes[k].values.size(); ++p) {
                acc += inst.boxes[k].probs[p];
                if (u <= acc) {
                    drawn[k + 1] = inst.boxes[k].values[p];
                    break;
                }
            }
        }
        const auto rec = run_weitzman(
            ids, r, inst.outside, [&](int j) { return drawn[j]; }, repl);
        double net = rec.searched.empty() ? inst.outside
                                          : *std::max_element(rec.realized_utilities.begin(),
                                                              rec.realized_utilities.end());
        net = std::max(net, inst.outside);
        for (int j : rec.searched) net -= inst.boxes[j - 1].cost;
        sum += net;
        sum2 += net * net;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean - exact) <= 3.0 * se + 1e-12);
}
