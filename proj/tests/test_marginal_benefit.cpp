#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "pmrank/marginal_benefit.hpp"
#include "pmrank/rng.hpp"

using namespace pmrank;

namespace {

std::vector<MatchValueDist> assumption1_families() {
    return {MatchValueDist::normal(0.0, 1.0),   MatchValueDist::normal(0.0, 3.0),
            MatchValueDist::normal(-1.5, 0.7),  MatchValueDist::type1ev(0.0, 1.0),
            MatchValueDist::type1ev(0.5, 2.0),  MatchValueDist::logistic(0.0, 1.0),
            MatchValueDist::logistic(-0.3, 1.8)};
}

}  // namespace

TEST_CASE("G at the standard normal origin matches the quadrature oracle", "[marginal_benefit]") {
    const auto d = MatchValueDist::normal(0.0, 1.0);
    // independent oracle: direct quadrature of the defining integral
    const double oracle = quadrature_marginal_benefit(0.0, d);
    CHECK(std::abs(oracle - 0.3989422804014327) < 1e-12);
    CHECK(std::abs(marginal_benefit(0.0, d) - oracle) < 1e-12);
}

TEST_CASE("G vanishes far in the upper tail", "[marginal_benefit]") {
    for (const auto& d : assumption1_families()) {
        // the 1e-8 cutoff at ten standard deviations is a normal-tail figure;
        // exponential tails (logistic, type-I EV) need a few more scale units
        const double w10 = d.location() + 10.0 * d.scale();
        const double g10 = marginal_benefit(w10, d);
        CHECK(g10 >= 0.0);
        if (d.family() == DistFamily::Normal) {
            CHECK(g10 < 1e-8);
        } else {
            CHECK(g10 < 1e-4);
            CHECK(marginal_benefit(d.location() + 30.0 * d.scale(), d) < 1e-8);
        }
        CHECK(marginal_benefit(w10 + d.scale(), d) <= g10);
    }
}

TEST_CASE("normal scale equivariance of G", "[marginal_benefit]") {
    const auto d1 = MatchValueDist::normal(0.0, 1.0);
    CHECK(std::abs(marginal_benefit(0.0, MatchValueDist::normal(0.0, 3.0)) -
                   3.0 * marginal_benefit(0.0, d1)) < 1e-12);
    for (double sigma : {0.5, 2.0, 3.0}) {
        const auto ds = MatchValueDist::normal(0.0, sigma);
        for (double w = -5.0; w <= 5.0; w += 0.5) {
            CHECK(std::abs(marginal_benefit(sigma * w, ds) - sigma * marginal_benefit(w, d1)) <
                  1e-9);
        }
    }
}

TEST_CASE("G strictly decreasing and nonnegative on a 200 point grid", "[marginal_benefit]") {
    for (const auto& d : assumption1_families()) {
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 200; ++i) {
            const double w = -5.0 + 10.0 * i / 199.0;
            const double g = marginal_benefit(w, d);
            CHECK(g >= 0.0);
            CHECK(g < prev);
            prev = g;
        }
    }
}

TEST_CASE("quadrature fallback agrees with closed forms", "[marginal_benefit]") {
    for (const auto& d : {MatchValueDist::normal(0.0, 1.0), MatchValueDist::normal(0.2, 3.0),
                          MatchValueDist::logistic(0.0, 1.0), MatchValueDist::logistic(0.4, 2.0)}) {
        for (double w = -5.0; w <= 5.0; w += 0.25) {
            CHECK(std::abs(marginal_benefit(w, d) - quadrature_marginal_benefit(w, d)) < 1e-9);
        }
    }
}

TEST_CASE("inverse round trip on [-5,5] for every family", "[marginal_benefit]") {
    for (const auto& d : assumption1_families()) {
        for (int i = 0; i < 100; ++i) {
            const double w = d.location() + d.scale() * (-5.0 + 10.0 * i / 99.0);
            const double c = marginal_benefit(w, d);
            const double back = inverse_marginal_benefit(c, d);
            CHECK(std::abs(back - w) < 1e-8);
        }
    }
}

TEST_CASE("inverse is strictly decreasing in cost", "[marginal_benefit]") {
    for (const auto& d : assumption1_families()) {
        Rng rng(31);
        for (int rep = 0; rep < 50; ++rep) {
            const double c1 = std::exp(rng.uniform(-4.0, 2.0));
            const double c2 = c1 * rng.uniform(1.01, 3.0);
            CHECK(inverse_marginal_benefit(c1, d) > inverse_marginal_benefit(c2, d));
        }
    }
}

TEST_CASE("inverse forward evaluation oracle at the origin", "[marginal_benefit]") {
    const auto d = MatchValueDist::normal(0.0, 1.0);
    CHECK(std::abs(inverse_marginal_benefit(0.3989422804, d) - 0.0) < 1e-6);
}

TEST_CASE("inverse rejects non-positive and non-finite costs", "[marginal_benefit]") {
    const auto d = MatchValueDist::normal(0.0, 1.0);
    CHECK_THROWS_AS(inverse_marginal_benefit(0.0, d), NumericError);
    CHECK_THROWS_AS(inverse_marginal_benefit(-1.0, d), NumericError);
    CHECK_THROWS_AS(inverse_marginal_benefit(std::nan(""), d), NumericError);
    CHECK_THROWS_AS(marginal_benefit(std::nan(""), d), NumericError);
}

TEST_CASE("reservation utility oracle and shift additivity", "[marginal_benefit]") {
    const auto d = MatchValueDist::normal(0.0, 1.0);
    const double c0 = marginal_benefit(0.0, d);
    CHECK(std::abs(reservation_utility({c0, 0.0, d})) < 1e-6);

    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const double c = std::exp(rng.uniform(-3.0, 2.0));
        const double delta = rng.normal(0.0, 2.0);
        const double shift = rng.normal(0.0, 1.0);
        const double r0 = reservation_utility({c, delta, d});
        // additivity in the prior utility, up to one rounding of the sum
        CHECK(std::abs(reservation_utility({c, delta + shift, d}) - (r0 + shift)) <=
              1e-12 * std::max(1.0, std::abs(r0)));
        // higher cost means strictly lower reservation utility
        CHECK(reservation_utility({c * 1.3, delta, d}) < r0);
    }
}

TEST_CASE("GInverseTable matches direct root finding", "[marginal_benefit]") {
    for (const auto& d : {MatchValueDist::normal(0.0, 3.0), MatchValueDist::type1ev(0.0, 1.0)}) {
        const auto table = GInverseTable::build(d, 1e-3, 50.0, 512);
        const auto& vals = table.values();
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) CHECK(vals[i] > vals[i + 1]);

        Rng rng(91);
        double max_err = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const double c = std::exp(rng.uniform(std::log(1e-3), std::log(50.0)));
            max_err = std::max(max_err, std::abs(table.lookup(c) - inverse_marginal_benefit(c, d)));
        }
        CHECK(max_err <= 1e-6);
    }
}

TEST_CASE("GInverseTable rejects degenerate grids and out-of-range costs", "[marginal_benefit]") {
    const auto d = MatchValueDist::normal(0.0, 1.0);
    CHECK_THROWS_AS(GInverseTable::build(d, 0.01, 1.0, 2), ConfigError);
    const auto table = GInverseTable::build(d, 0.01, 1.0, 64);
    CHECK_THROWS_AS(table.lookup(0.001), NumericError);
    CHECK_THROWS_AS(table.lookup(2.0), NumericError);
    CHECK_NOTHROW(table.lookup(0.5));
}

TEST_CASE("GInverseTable serialization round trip", "[marginal_benefit]") {
    const auto d = MatchValueDist::logistic(0.1, 1.3);
    const auto table = GInverseTable::build(d, 0.05, 5.0, 64);
    const auto j = table.to_json();
    CHECK(j.at("spec_version").get<int>() == kSpecVersion);
    const auto back = GInverseTable::from_json(j);
    for (double c : {0.06, 0.2, 1.0, 4.9}) CHECK(back.lookup(c) == table.lookup(c));
}

TEST_CASE("distribution JSON round trip", "[marginal_benefit]") {
    for (const auto& d : assumption1_families()) {
        nlohmann::json j = d;
        const auto back = j.get<MatchValueDist>();
        CHECK(back.family() == d.family());
        CHECK(back.location() == d.location());
        CHECK(back.scale() == d.scale());
    }
    nlohmann::json alt = {{"family", "normal"}, {"params", {{"mean", 0.5}, {"sd", 2.0}}}};
    const auto d = alt.get<MatchValueDist>();
    CHECK(d.location() == 0.5);
    CHECK(d.scale() == 2.0);
    CHECK_THROWS_AS(MatchValueDist::normal(0.0, -1.0), ConfigError);
}

TEST_CASE("CachedGinv falls back outside the table", "[marginal_benefit]") {
    const auto d = MatchValueDist::normal(0.0, 3.0);
    const CachedGinv g(d, 1e-3, 10.0, 256);
    CHECK(std::abs(g(0.5) - inverse_marginal_benefit(0.5, d)) < 1e-6);
    CHECK(std::abs(g(100.0) - inverse_marginal_benefit(100.0, d)) < 1e-9);
    CHECK(std::abs(g(1e-5) - inverse_marginal_benefit(1e-5, d)) < 1e-9);
}
