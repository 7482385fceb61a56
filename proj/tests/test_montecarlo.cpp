#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>

#include "pmrank/io.hpp"
#include "pmrank/montecarlo.hpp"

using namespace pmrank;

TEST_CASE("single replication study reports the one-draw error exactly", "[montecarlo]") {
    StudyConfig cfg = make_study_profile("table1-desk");
    cfg.n_reps = 1;
    cfg.market.n_consumers = 350;
    cfg.market.n_products = 8;
    cfg.run_lik_misspec = false;
    cfg.run_lik_true = false;
    cfg.pmr.restarts = 4;
    cfg.pmr.min_obs = 10;
    const auto table = run_study(cfg);
    REQUIRE(table.rows.size() == 2);
    // with one replication, bias^2 equals the reported mse exactly
    for (const auto& r : table.rows) {
        CHECK(std::abs(r.mean_bias * r.mean_bias - r.mse) <= 1e-15);
    }
    CHECK(table.failed_reps == 0);
}

TEST_CASE("study tables are byte identical under the same manifest", "[montecarlo]") {
    StudyConfig cfg = make_study_profile("table1-desk");
    cfg.n_reps = 2;
    cfg.market.n_consumers = 300;
    cfg.market.n_products = 6;
    cfg.run_lik_misspec = false;
    cfg.run_lik_true = true;
    cfg.lik_true.n_draws = 10;
    cfg.lik_true.opt.max_iter = 15;
    cfg.pmr.restarts = 3;
    cfg.pmr.min_obs = 10;
    const auto t1 = run_study(cfg);
    const auto t2 = run_study(cfg);
    CHECK(t1.to_csv() == t2.to_csv());
    CHECK(t1.manifest.dump() == t2.manifest.dump());

    const std::string dir = "build_test_study_out";
    write_study(dir, t1);
    CHECK(read_text_file(dir + "/study.csv") == t1.to_csv());
    std::filesystem::remove_all(dir);
}

TEST_CASE("profiles pin the documented scales", "[montecarlo]") {
    const auto desk = make_study_profile("table1-desk");
    CHECK(desk.n_reps == 50);
    CHECK(desk.market.n_consumers == 2000);
    CHECK(desk.market.n_products == 30);
    CHECK(desk.market.match_dist.scale() == 3.0);
    CHECK(desk.lik_misspec.assumed_match.scale() == 1.0);
    CHECK(desk.lik_true.assumed_match.scale() == 3.0);
    CHECK(desk.lik_misspec.n_draws == 50);
    CHECK(desk.lik_misspec.logit_scale == 1.0 / 3.0);
    const auto full = make_study_profile("table1-full");
    CHECK(full.n_reps == 500);
    CHECK(full.market.n_consumers == 5000);
    CHECK_THROWS_AS(make_study_profile("bogus"), ConfigError);
}

TEST_CASE("ginv comparison export is decreasing and steeper for the wide truth",
          "[montecarlo]") {
    VecD costs;
    for (int i = 0; i < 41; ++i) costs.push_back(0.3 * std::pow(1.15, i));
    const auto cmp = export_ginv_comparison(MatchValueDist::normal(0.0, 3.0),
                                            MatchValueDist::normal(0.0, 1.0), costs);
    CHECK(cmp.slope_true_at_median < cmp.slope_misspec_at_median);
    CHECK(cmp.slope_true_at_median < 0.0);
    // identical distributions give identical curves
    const auto same = export_ginv_comparison(MatchValueDist::normal(0.0, 3.0),
                                             MatchValueDist::normal(0.0, 3.0), costs);
    CHECK(same.ginv_true == same.ginv_misspec);
    const std::string csv = cmp.to_csv();
    CHECK(csv.rfind("cost,ginv_true,ginv_misspec", 0) == 0);
}

TEST_CASE("market directory round trips bit exactly", "[montecarlo]") {
    MarketConfig mc;
    mc.n_consumers = 40;
    mc.n_products = 5;
    mc.q_xbar = 1;
    mc.beta_xbar = {0.5};
    mc.seed = 77;
    const Market m = generate_market(mc);
    const auto records = simulate_searches(m);
    const std::string dir = "build_test_market_out";
    write_market_dir(dir, m, records);
    const auto loaded = read_market_dir(dir);
    CHECK(loaded.market.x == m.x);
    CHECK(loaded.market.z == m.z);
    CHECK(loaded.market.xi == m.xi);
    CHECK(loaded.market.eta == m.eta);
    CHECK(loaded.market.eps == m.eps);
    CHECK(loaded.market.nu == m.nu);
    CHECK(loaded.market.xbar == m.xbar);
    REQUIRE(loaded.records.size() == records.size());
    for (std::size_t a = 0; a < records.size(); ++a) {
        CHECK(loaded.records[a].searched == records[a].searched);
        CHECK(loaded.records[a].purchase == records[a].purchase);
        CHECK(loaded.records[a].realized_utilities == records[a].realized_utilities);
    }
    std::filesystem::remove_all(dir);
}
