#pragma once

#include <filesystem>

#include "pmrank/csv.hpp"
#include "pmrank/likelihood.hpp"
#include "pmrank/pmr.hpp"
#include "pmrank/simulate.hpp"

namespace pmrank {

struct StudyConfig {
    std::string name = "custom";
    int n_reps = 50;
    MarketConfig market;
    bool run_pmr = true;
    bool run_lik_misspec = true;
    bool run_lik_true = true;
    PmrEstimateConfig pmr;
    LikelihoodConfig lik_misspec;
    LikelihoodConfig lik_true;
    std::uint64_t seed = 1001;

    nlohmann::json to_json_obj() const {
        return nlohmann::json{{"spec_version", kSpecVersion},
                              {"name", name},
                              {"n_reps", n_reps},
                              {"market", market},
                              {"run_pmr", run_pmr},
                              {"run_lik_misspec", run_lik_misspec},
                              {"run_lik_true", run_lik_true},
                              {"pmr", pmr.to_json_obj()},
                              {"lik_misspec", lik_misspec.to_json_obj()},
                              {"lik_true", lik_true.to_json_obj()},
                              {"seed", seed}};
    }
};

// Named study profiles. The desk profile targets the bias sign pattern and
// magnitudes at laptop scale; the full profile mirrors the 500-rep design
// and is marked long-running.
inline StudyConfig make_study_profile(const std::string& name) {
    StudyConfig s;
    s.name = name;
    s.market.n_products = 30;
    s.market.beta = {-1.0, 1.0};
    s.market.gamma = {0.2, 0.3};
    s.market.match_dist = MatchValueDist::normal(0.0, 3.0);
    s.market.seed = 1;

    // PMR: fixed-value normalization pinning the exogenous coefficients at
    // truth so the endogenous price and position coefficients are estimated
    // freely and their biases are directly comparable
    s.pmr.norm.mode = Normalization::Mode::Fixed;
    s.pmr.norm.pin_index_b = 1;
    s.pmr.norm.pin_value_b = 1.0;
    s.pmr.norm.pin_index_m = 1;
    s.pmr.norm.pin_value_m = 0.3;
    s.pmr.restarts = 10;
    s.pmr.min_obs = 30;

    s.lik_misspec.assumed_match = MatchValueDist::normal(0.0, 1.0);
    s.lik_true.assumed_match = MatchValueDist::normal(0.0, 3.0);
    s.lik_misspec.opt.max_iter = 80;
    s.lik_true.opt.max_iter = 80;

    if (name == "table1-desk") {
        s.n_reps = 50;
        s.market.n_consumers = 2000;
    } else if (name == "table1-full") {
        s.n_reps = 500;
        s.market.n_consumers = 5000;
    } else {
        throw ConfigError("unknown study profile: " + name);
    }
    return s;
}

struct StudyRow {
    std::string estimator;
    std::string coefficient;
    double true_value = 0.0;
    double mean_bias = 0.0;
    double mse = 0.0;
    double mean_obs = 0.0;
};

struct StudyTable {
    std::vector<StudyRow> rows;
    nlohmann::json manifest;
    int failed_reps = 0;

    double cell(const std::string& estimator, const std::string& coefficient,
                bool want_mse = false) const {
        for (const auto& r : rows)
            if (r.estimator == estimator && r.coefficient == coefficient)
                return want_mse ? r.mse : r.mean_bias;
        throw DataError("no study cell for " + estimator + "/" + coefficient);
    }

    std::string to_csv() const {
        std::string out = "estimator,coefficient,true_value,mean_bias,mse,mean_obs\n";
        for (const auto& r : rows)
            out += r.estimator + "," + r.coefficient + "," + format_double_short(r.true_value) +
                   "," + format_double_short(r.mean_bias) + "," + format_double_short(r.mse) +
                   "," + format_double_short(r.mean_obs) + "\n";
        return out;
    }
};

namespace detail {

struct RepOutcome {
    bool pmr_ok = false, misspec_ok = false, true_ok = false;
    double pmr_price = 0.0, pmr_position = 0.0;
    double pmr_obs = 0.0;
    VecD lik_misspec_raw, lik_true_raw;
    double lik_obs = 0.0;
};

}  // namespace detail

inline StudyTable run_study(const StudyConfig& cfg) {
    if (cfg.n_reps < 1) throw ConfigError("study needs n_reps >= 1");
    std::vector<detail::RepOutcome> reps(cfg.n_reps);

    parallel_for(cfg.n_reps, [&](int r) {
        auto& out = reps[r];
        MarketConfig mc = cfg.market;
        std::uint64_t mix = cfg.seed;
        mix = splitmix64(mix) ^ static_cast<std::uint64_t>(r);
        mc.seed = splitmix64(mix);
        const Market market = generate_market(mc);
        const auto records = simulate_searches(market);

        if (cfg.run_pmr) {
            try {
                const auto [i, j] = most_searched_pair(records, market.J);
                const auto table = construct_outcomes(records, market, i, j);
                PmrEstimateConfig pc = cfg.pmr;
                pc.seed = mc.seed + 17;
                const auto rep = estimate_pmr({table}, pc);
                out.pmr_price = rep.coef("beta_price");
                out.pmr_position = rep.coef("gamma_position");
                out.pmr_obs = static_cast<double>(rep.n_pairs);
                out.pmr_ok = true;
            } catch (const std::exception&) {
                out.pmr_ok = false;
            }
        }
        auto run_lik = [&](const LikelihoodConfig& base, VecD& dst, bool& ok) {
            try {
                LikelihoodConfig lc = base;
                lc.seed = mc.seed + 41;
                const auto rep = estimate_likelihood(market, records, lc);
                dst = rep.raw_estimates;
                out.lik_obs = static_cast<double>(market.n) * market.J;
                ok = true;
            } catch (const std::exception&) {
                ok = false;
            }
        };
        if (cfg.run_lik_misspec) run_lik(cfg.lik_misspec, out.lik_misspec_raw, out.misspec_ok);
        if (cfg.run_lik_true) run_lik(cfg.lik_true, out.lik_true_raw, out.true_ok);
    });

    const auto xn = cfg.market.effective_x_names();
    const auto zn = cfg.market.effective_z_names();
    StudyTable table;
    table.manifest = cfg.to_json_obj();

    auto moments = [&](const std::string& estimator, const std::string& coef, double truth,
                       const std::function<bool(const detail::RepOutcome&)>& ok,
                       const std::function<double(const detail::RepOutcome&)>& value,
                       const std::function<double(const detail::RepOutcome&)>& obs) {
        double bias = 0.0, mse = 0.0, mobs = 0.0;
        int used = 0;
        for (const auto& r : reps) {
            if (!ok(r)) continue;
            const double err = value(r) - truth;
            bias += err;
            mse += err * err;
            mobs += obs(r);
            ++used;
        }
        if (used < cfg.n_reps - static_cast<int>(0.05 * cfg.n_reps))
            throw DataError("study aborted: too many failed replications for " + estimator);
        table.failed_reps += cfg.n_reps - used;
        table.rows.push_back({estimator, coef, truth, bias / used, mse / used, mobs / used});
    };

    if (cfg.run_pmr) {
        moments(
            "pmr", "beta_" + xn[0], cfg.market.beta[0],
            [](const auto& r) { return r.pmr_ok; }, [](const auto& r) { return r.pmr_price; },
            [](const auto& r) { return r.pmr_obs; });
        moments(
            "pmr", "gamma_" + zn[0], cfg.market.gamma[0],
            [](const auto& r) { return r.pmr_ok; }, [](const auto& r) { return r.pmr_position; },
            [](const auto& r) { return r.pmr_obs; });
    }
    auto lik_rows = [&](const std::string& name,
                        const std::function<bool(const detail::RepOutcome&)>& ok,
                        const std::function<const VecD&(const detail::RepOutcome&)>& raw) {
        for (int k = 0; k < cfg.market.q_x; ++k)
            moments(
                name, "beta_" + xn[k], cfg.market.beta[k], ok,
                [&, k](const auto& r) { return raw(r)[k]; },
                [](const auto& r) { return r.lik_obs; });
        for (int k = 0; k < cfg.market.q_z; ++k)
            moments(
                name, "gamma_" + zn[k], cfg.market.gamma[k], ok,
                [&, k](const auto& r) { return raw(r)[cfg.market.q_x + k]; },
                [](const auto& r) { return r.lik_obs; });
    };
    if (cfg.run_lik_misspec)
        lik_rows(
            "likelihood_misspec", [](const auto& r) { return r.misspec_ok; },
            [](const auto& r) -> const VecD& { return r.lik_misspec_raw; });
    if (cfg.run_lik_true)
        lik_rows(
            "likelihood_true", [](const auto& r) { return r.true_ok; },
            [](const auto& r) -> const VecD& { return r.lik_true_raw; });
    return table;
}

inline void write_study(const std::string& dir, const StudyTable& table) {
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/study.csv", table.to_csv());
    write_text_file(dir + "/manifest.json", table.manifest.dump(2) + "\n");
}

// Figure-1 style export: inverse marginal benefit curves of the true and a
// misspecified distribution on a shared cost grid, with slopes at the median
// cost. The true (wider) distribution is the steeper one.
struct GinvComparison {
    VecD costs;
    VecD ginv_true;
    VecD ginv_misspec;
    double slope_true_at_median = 0.0;
    double slope_misspec_at_median = 0.0;

    std::string to_csv() const {
        std::string out = "cost,ginv_true,ginv_misspec\n";
        for (std::size_t i = 0; i < costs.size(); ++i)
            out += format_double_short(costs[i]) + "," + format_double_short(ginv_true[i]) + "," +
                   format_double_short(ginv_misspec[i]) + "\n";
        return out;
    }
};

inline GinvComparison export_ginv_comparison(const MatchValueDist& true_dist,
                                             const MatchValueDist& misspec_dist, VecD costs) {
    if (costs.size() < 3) throw ConfigError("ginv comparison needs at least 3 costs");
    std::sort(costs.begin(), costs.end());
    if (!(costs.front() > 0.0)) throw ConfigError("costs must be positive");
    GinvComparison out;
    out.costs = costs;
    for (double c : costs) {
        out.ginv_true.push_back(inverse_marginal_benefit(c, true_dist));
        out.ginv_misspec.push_back(inverse_marginal_benefit(c, misspec_dist));
    }
    for (std::size_t i = 0; i + 1 < costs.size(); ++i)
        if (!(out.ginv_true[i] > out.ginv_true[i + 1]) ||
            !(out.ginv_misspec[i] > out.ginv_misspec[i + 1]))
            throw NumericError("ginv comparison curves are not decreasing");
    const double median = costs[costs.size() / 2];
    const double h = 1e-4 * median;
    auto slope = [&](const MatchValueDist& d) {
        return (inverse_marginal_benefit(median + h, d) -
                inverse_marginal_benefit(median - h, d)) /
               (2.0 * h);
    };
    out.slope_true_at_median = slope(true_dist);
    out.slope_misspec_at_median = slope(misspec_dist);
    return out;
}

}  // namespace pmrank
