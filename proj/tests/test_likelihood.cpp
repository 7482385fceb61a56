#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "pmrank/likelihood.hpp"

using namespace pmrank;

namespace {

MarketConfig toy_config(int n, int J, std::uint64_t seed) {
    MarketConfig c;
    c.n_consumers = n;
    c.n_products = J;
    c.seed = seed;
    c.xi_sd = 0.0;
    c.price_xi_loading = 0.0;
    c.position_xi_loading = 0.0;
    c.match_dist = MatchValueDist::normal(0.0, 1.0);
    c.eta_sd = 1.0;
    return c;
}

}  // namespace

TEST_CASE("common random numbers make the log likelihood deterministic", "[likelihood]") {
    const auto m = generate_market(toy_config(60, 4, 11));
    const auto records = simulate_searches(m);
    LikelihoodConfig cfg;
    cfg.n_draws = 20;
    const VecD beta{-0.8, 0.9}, gamma{0.25, 0.2};
    const double l1 = simulated_loglik(m, records, beta, gamma, cfg);
    const double l2 = simulated_loglik(m, records, beta, gamma, cfg);
    CHECK(l1 == l2);
    CHECK(std::isfinite(l1));
}

TEST_CASE("probability is invariant to permuting the draw order", "[likelihood]") {
    const auto m = generate_market(toy_config(25, 4, 13));
    const auto records = simulate_searches(m);
    LikelihoodConfig cfg;
    cfg.n_draws = 16;
    LikDraws draws = LikDraws::generate(m.n, m.J, cfg);
    const CachedGinv ginv = likelihood_ginv(cfg);
    const VecD beta{-1.0, 0.8}, gamma{0.2, 0.3};
    const double base = loglik_with_draws(m, records, beta, gamma, cfg, draws, ginv);

    // reverse the draw axis for every consumer
    LikDraws rev = draws;
    for (int a = 0; a < draws.n; ++a)
        for (int rho = 0; rho < draws.R; ++rho)
            for (int j = 0; j < draws.J; ++j) {
                const std::size_t dst = (static_cast<std::size_t>(a) * draws.R + rho) * draws.J + j;
                const std::size_t src =
                    (static_cast<std::size_t>(a) * draws.R + (draws.R - 1 - rho)) * draws.J + j;
                rev.eta[dst] = draws.eta[src];
                rev.eps[dst] = draws.eps[src];
            }
    const double permuted = loglik_with_draws(m, records, beta, gamma, cfg, rev, ginv);
    CHECK(std::abs(permuted - base) < 1e-10);
}

TEST_CASE("vanishing logit scale recovers the crude accept-reject frequency", "[likelihood]") {
    const auto m = generate_market(toy_config(1, 3, 17));
    const auto records = simulate_searches(m);
    LikelihoodConfig cfg;
    cfg.n_draws = 64;
    cfg.logit_scale = 1e-9;
    const LikDraws draws = LikDraws::generate(m.n, m.J, cfg);
    const CachedGinv ginv = likelihood_ginv(cfg);
    const VecD beta{-1.0, 1.0}, gamma{0.2, 0.3};
    LikDiagnostics diag;
    loglik_with_draws(m, records, beta, gamma, cfg, draws, ginv, &diag);
    REQUIRE(diag.consumer_probs.size() == 1);

    // crude AR frequency over the same draws, sharp indicators
    const auto& rec = records[0];
    int accepted = 0;
    for (int rho = 0; rho < cfg.n_draws; ++rho) {
        const double* eta = draws.eta_at(0, rho);
        const double* eps = draws.eps_at(0, rho);
        VecD r(m.J), u(m.J);
        for (int j = 1; j < m.J; ++j) {
            const double cost = std::exp(dot(m.z_at(0, j), gamma.data(), 2));
            const double d = dot(m.x_at(0, j), beta.data(), 2);
            r[j] = ginv(cost) + d + eta[j];
            u[j] = d + eta[j] + eps[j];
        }
        bool ok = true;
        double best = 0.0;
        std::vector<char> searched(m.J, 0);
        for (std::size_t t = 0; t < rec.searched.size(); ++t) {
            const int j = rec.searched[t];
            if (!(r[j] > best)) ok = false;
            if (t + 1 < rec.searched.size() && !(r[j] > r[rec.searched[t + 1]])) ok = false;
            searched[j] = 1;
            best = std::max(best, u[j]);
        }
        double max_unsearched = -1e300;
        for (int j = 1; j < m.J; ++j)
            if (!searched[j]) max_unsearched = std::max(max_unsearched, r[j]);
        if (max_unsearched > -1e299) {
            if (!rec.searched.empty() && !(r[rec.searched.back()] > max_unsearched)) ok = false;
            if (!(best > max_unsearched)) ok = false;
        }
        if (!rec.searched.empty()) {
            const double u_y = rec.purchase == 0 ? 0.0 : u[rec.purchase];
            double best_other = rec.purchase == 0 ? -1e300 : 0.0;
            for (int j : rec.searched)
                if (j != rec.purchase) best_other = std::max(best_other, u[j]);
            if (best_other > -1e299 && !(u_y > best_other)) ok = false;
        }
        if (ok) ++accepted;
    }
    const double crude = static_cast<double>(accepted) / cfg.n_draws;
    CHECK(std::abs(diag.consumer_probs[0] - crude) < 1e-6);
}

TEST_CASE("simulated probability matches exact enumeration on a discrete toy", "[likelihood]") {
    // 1 consumer, 2 inside products; eps and eta on small discrete supports
    // so the smoothed probability has an exactly enumerable expectation.
    auto cfgm = toy_config(1, 3, 23);
    const auto m = generate_market(cfgm);
    const auto records = simulate_searches(m);
    LikelihoodConfig cfg;
    cfg.n_draws = 4000;
    cfg.logit_scale = 1.0 / 3.0;
    cfg.seed = 5;

    const VecD eps_support{-1.0, 0.2, 1.5};
    const VecD eta_support{-0.5, 0.0, 0.5};
    LikDraws draws;
    draws.n = 1;
    draws.J = 3;
    draws.R = cfg.n_draws;
    draws.eta.assign(static_cast<std::size_t>(draws.R) * draws.J, 0.0);
    draws.eps.assign(static_cast<std::size_t>(draws.R) * draws.J, 0.0);
    Rng rng(99);
    for (int rho = 0; rho < draws.R; ++rho)
        for (int j = 1; j < 3; ++j) {
            draws.eta[static_cast<std::size_t>(rho) * 3 + j] =
                eta_support[rng.next_u64() % 3];
            draws.eps[static_cast<std::size_t>(rho) * 3 + j] =
                eps_support[rng.next_u64() % 3];
        }

    const CachedGinv ginv = likelihood_ginv(cfg);
    const VecD beta{-1.0, 1.0}, gamma{0.2, 0.3};
    LikDiagnostics diag;
    loglik_with_draws(m, records, beta, gamma, cfg, draws, ginv, &diag);
    const double simulated = diag.consumer_probs[0];

    // exact expectation: enumerate all 81 support combinations with a
    // single-draw evaluation each
    double exact = 0.0;
    VecD per_draw;
    for (double e1 : eps_support)
        for (double e2 : eps_support)
            for (double h1 : eta_support)
                for (double h2 : eta_support) {
                    LikDraws one;
                    one.n = 1;
                    one.J = 3;
                    one.R = 1;
                    one.eta = {0.0, h1, h2};
                    one.eps = {0.0, e1, e2};
                    exact += consumer_probability(m, records[0], beta, gamma, cfg, one, ginv) /
                             81.0;
                }
    // single-draw products for the standard error of the simulated mean
    double var = 0.0;
    for (int rho = 0; rho < draws.R; ++rho) {
        LikDraws one;
        one.n = 1;
        one.J = 3;
        one.R = 1;
        one.eta.assign(draws.eta.begin() + rho * 3, draws.eta.begin() + rho * 3 + 3);
        one.eps.assign(draws.eps.begin() + rho * 3, draws.eps.begin() + rho * 3 + 3);
        const double p = consumer_probability(m, records[0], beta, gamma, cfg, one, ginv);
        var += (p - simulated) * (p - simulated);
    }
    const double se = std::sqrt(var / cfg.n_draws / cfg.n_draws);
    CHECK(std::abs(simulated - exact) <= 3.0 * se + 1e-12);
}

TEST_CASE("log likelihood is continuous along parameter segments", "[likelihood]") {
    const auto m = generate_market(toy_config(80, 5, 29));
    const auto records = simulate_searches(m);
    LikelihoodConfig cfg;
    cfg.n_draws = 12;
    const LikDraws draws = LikDraws::generate(m.n, m.J, cfg);
    const CachedGinv ginv = likelihood_ginv(cfg);

    Rng rng(31);
    for (int seg = 0; seg < 3; ++seg) {
        VecD th0{rng.normal(-1, 0.5), rng.normal(1, 0.5), rng.normal(0.2, 0.2),
                 rng.normal(0.3, 0.2)};
        VecD th1 = th0;
        for (auto& v : th1) v += rng.normal(0.0, 0.5);
        auto eval = [&](double t) {
            VecD beta{th0[0] + t * (th1[0] - th0[0]), th0[1] + t * (th1[1] - th0[1])};
            VecD gamma{th0[2] + t * (th1[2] - th0[2]), th0[3] + t * (th1[3] - th0[3])};
            return loglik_with_draws(m, records, beta, gamma, cfg, draws, ginv);
        };
        double coarse = 0.0, fine = 0.0;
        const int nc = 20, nf = 2000;
        double prev = eval(0.0);
        for (int i = 1; i <= nc; ++i) {
            const double v = eval(static_cast<double>(i) / nc);
            coarse = std::max(coarse, std::abs(v - prev));
            prev = v;
        }
        prev = eval(0.0);
        for (int i = 1; i <= nf; ++i) {
            const double v = eval(static_cast<double>(i) / nf);
            fine = std::max(fine, std::abs(v - prev));
            prev = v;
        }
        // a jump would keep the max step constant under refinement
        CHECK(fine <= coarse / 10.0 + 1e-9);
    }
}

TEST_CASE("impossible parameters hit the probability floor without NaNs", "[likelihood]") {
    const auto m = generate_market(toy_config(40, 4, 37));
    const auto records = simulate_searches(m);
    LikelihoodConfig cfg;
    cfg.n_draws = 8;
    LikDiagnostics diag;
    const double ll =
        simulated_loglik(m, records, {500.0, -500.0}, {5.0, -5.0}, cfg, &diag);
    CHECK(std::isfinite(ll));
    CHECK(diag.floored > 0);
}

TEST_CASE("estimation recovers parameters under correct specification", "[likelihood]") {
    // exogenous DGP simulated from the same family the likelihood assumes
    auto cm = toy_config(900, 5, 41);
    cm.eta_sd = 1.0;  // matches the assumed eta N(0,1)
    const auto m = generate_market(cm);
    const auto records = simulate_searches(m);

    LikelihoodConfig cfg;
    cfg.n_draws = 40;
    cfg.seed = 3;
    cfg.opt.max_iter = 60;
    const auto rep = estimate_likelihood(m, records, cfg);
    REQUIRE(rep.raw_estimates.size() == 4);
    CHECK(std::abs(rep.raw_estimates[0] - (-1.0)) < 0.3);
    CHECK(std::abs(rep.raw_estimates[1] - 1.0) < 0.3);
    CHECK(std::abs(rep.raw_estimates[2] - 0.2) < 0.2);
    CHECK(std::abs(rep.raw_estimates[3] - 0.3) < 0.25);
    // price normalization
    CHECK(rep.estimates[0] == -1.0);
    CHECK(std::abs(rep.estimates[1] - rep.raw_estimates[1] / std::abs(rep.raw_estimates[0])) <
          1e-12);
}
