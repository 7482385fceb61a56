#pragma once

#include <algorithm>

#include "pmrank/marginal_benefit.hpp"
#include "pmrank/market.hpp"
#include "pmrank/optimize.hpp"
#include "pmrank/parallel.hpp"
#include "pmrank/report.hpp"
#include "pmrank/simulate.hpp"

namespace pmrank {

// Logit-smoothed accept-reject likelihood for the no-quality search model:
// utilities x'b + eta + eps, outside utility 0, reservation values from the
// assumed match-value distribution.
struct LikelihoodConfig {
    MatchValueDist assumed_match = MatchValueDist::normal(0.0, 1.0);
    MatchValueDist assumed_eta = MatchValueDist::normal(0.0, 1.0);
    int n_draws = 50;
    double logit_scale = 1.0 / 3.0;
    bool include_purchase = true;
    double prob_floor = 1e-12;
    std::uint64_t seed = 7;
    BfgsOptions opt;

    void validate() const {
        if (n_draws < 1) throw ConfigError("n_draws must be >= 1");
        if (!(logit_scale > 0.0)) throw ConfigError("logit_scale must be positive");
        if (!(prob_floor > 0.0)) throw ConfigError("prob_floor must be positive");
        assumed_match.validate();
        assumed_eta.validate();
    }

    nlohmann::json to_json_obj() const {
        return nlohmann::json{{"spec_version", kSpecVersion},
                              {"assumed_match", assumed_match},
                              {"assumed_eta", assumed_eta},
                              {"n_draws", n_draws},
                              {"logit_scale", logit_scale},
                              {"include_purchase", include_purchase},
                              {"prob_floor", prob_floor},
                              {"seed", seed}};
    }
};

inline LikelihoodConfig likelihood_config_from_json(const nlohmann::json& j) {
    LikelihoodConfig c;
    if (j.contains("assumed_match")) c.assumed_match = j.at("assumed_match").get<MatchValueDist>();
    if (j.contains("assumed_eta")) c.assumed_eta = j.at("assumed_eta").get<MatchValueDist>();
    c.n_draws = j.value("n_draws", 50);
    c.logit_scale = j.value("logit_scale", 1.0 / 3.0);
    c.include_purchase = j.value("include_purchase", true);
    c.prob_floor = j.value("prob_floor", 1e-12);
    c.seed = j.value("seed", std::uint64_t{7});
    c.validate();
    return c;
}

// Common random numbers: one (eta, eps) panel drawn once per estimation and
// reused across parameter evaluations. Layout [consumer][draw][product].
struct LikDraws {
    int n = 0, J = 0, R = 0;
    VecD eta;
    VecD eps;

    static LikDraws generate(int n_consumers, int n_products, const LikelihoodConfig& cfg) {
        LikDraws d;
        d.n = n_consumers;
        d.J = n_products;
        d.R = cfg.n_draws;
        d.eta.assign(static_cast<std::size_t>(d.n) * d.R * d.J, 0.0);
        d.eps.assign(static_cast<std::size_t>(d.n) * d.R * d.J, 0.0);
        parallel_for(d.n, [&](int a) {
            Rng rng = Rng::stream(cfg.seed, 0xD2A35u, static_cast<std::uint64_t>(a));
            for (int rho = 0; rho < d.R; ++rho)
                for (int j = 1; j < d.J; ++j) {
                    const std::size_t at = (static_cast<std::size_t>(a) * d.R + rho) * d.J + j;
                    d.eta[at] = cfg.assumed_eta.sample(rng);
                    d.eps[at] = cfg.assumed_match.sample(rng);
                }
        });
        return d;
    }

    const double* eta_at(int a, int rho) const {
        return &eta[(static_cast<std::size_t>(a) * R + rho) * J];
    }
    const double* eps_at(int a, int rho) const {
        return &eps[(static_cast<std::size_t>(a) * R + rho) * J];
    }
};

struct LikDiagnostics {
    int floored = 0;
    VecD consumer_probs;  // filled when requested
};

namespace detail {

inline double sigmoid_scaled(double v, double inv_scale) {
    const double t = v * inv_scale;
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-std::min(t, 500.0)));
    const double e = std::exp(std::max(t, -500.0));
    return e / (1.0 + e);
}

}  // namespace detail

// Per-consumer smoothed accept-reject probability. The smoothed conditions
// implied by the observed sequence j_1..j_k are:
//   selection order   r_{j_t} >= r_{j_{t+1}}         (t < k)
//                     r_{j_k} >= max unsearched r
//   continuation      max(u_0, u before t) <= r_{j_t} (t = 1..k)
//   stopping          max(u_0, all searched u) >= max unsearched r
//   choice            u_purchase >= every other searched u and u_0
// For k = 0 only the stopping condition binds (u_0 >= max over all r).
inline double consumer_probability(const Market& m, const SearchRecord& rec, const VecD& beta,
                                   const VecD& gamma, const LikelihoodConfig& cfg,
                                   const LikDraws& draws, const CachedGinv& ginv) {
    const int a = rec.consumer;
    const int J = m.J;
    const int qx = m.config.q_x, qz = m.config.q_z;
    const double inv_scale = 1.0 / cfg.logit_scale;

    // deterministic parts
    VecD base_r(J, 0.0), delta(J, 0.0);
    for (int j = 1; j < J; ++j) {
        delta[j] = dot(m.x_at(a, j), beta.data(), qx);
        const double cost = std::exp(dot(m.z_at(a, j), gamma.data(), qz));
        if (!std::isfinite(cost) || !(cost > 0.0)) return 0.0;
        base_r[j] = ginv(cost) + delta[j];
    }

    const auto& searched = rec.searched;
    const int k = static_cast<int>(searched.size());
    std::vector<char> is_searched(J, 0);
    for (int j : searched) is_searched[j] = 1;

    double total = 0.0;
    for (int rho = 0; rho < draws.R; ++rho) {
        const double* eta = draws.eta_at(a, rho);
        const double* eps = draws.eps_at(a, rho);
        double p = 1.0;

        double max_unsearched_r = -1e300;
        bool any_unsearched = false;
        for (int j = 1; j < J; ++j) {
            if (is_searched[j]) continue;
            any_unsearched = true;
            max_unsearched_r = std::max(max_unsearched_r, base_r[j] + eta[j]);
        }

        double best_u = 0.0;  // outside utility
        for (int t = 0; t < k; ++t) {
            const int j = searched[t];
            const double r_t = base_r[j] + eta[j];
            // continuation: best in hand before this search is below r_t
            p *= detail::sigmoid_scaled(r_t - best_u, inv_scale);
            // selection order vs the next searched product
            if (t + 1 < k) {
                const int jn = searched[t + 1];
                p *= detail::sigmoid_scaled(r_t - (base_r[jn] + eta[jn]), inv_scale);
            } else if (any_unsearched) {
                p *= detail::sigmoid_scaled(r_t - max_unsearched_r, inv_scale);
            }
            best_u = std::max(best_u, delta[j] + eta[j] + eps[j]);
        }
        if (any_unsearched)  // stopping (for k = 0 this is the whole story)
            p *= detail::sigmoid_scaled(best_u - max_unsearched_r, inv_scale);

        if (cfg.include_purchase && k > 0) {
            const int y = rec.purchase;
            const double u_y = y == 0 ? 0.0 : delta[y] + eta[y] + eps[y];
            double best_other = y == 0 ? -1e300 : 0.0;
            for (int j : searched)
                if (j != y) best_other = std::max(best_other, delta[j] + eta[j] + eps[j]);
            if (best_other > -1e299) p *= detail::sigmoid_scaled(u_y - best_other, inv_scale);
        }
        total += p;
    }
    return total / static_cast<double>(draws.R);
}

inline double loglik_with_draws(const Market& m, const std::vector<SearchRecord>& records,
                                const VecD& beta, const VecD& gamma, const LikelihoodConfig& cfg,
                                const LikDraws& draws, const CachedGinv& ginv,
                                LikDiagnostics* diag = nullptr) {
    VecD probs(records.size(), 0.0);
    parallel_for(static_cast<int>(records.size()), [&](int i) {
        probs[i] = consumer_probability(m, records[i], beta, gamma, cfg, draws, ginv);
    });
    double ll = 0.0;
    int floored = 0;
    for (double p : probs) {
        if (!(p > cfg.prob_floor)) {
            p = cfg.prob_floor;
            ++floored;
        }
        ll += std::log(p);
    }
    if (diag) {
        diag->floored = floored;
        diag->consumer_probs = std::move(probs);
    }
    return ll;
}

inline CachedGinv likelihood_ginv(const LikelihoodConfig& cfg) {
    // wide cache; out-of-range costs fall back to exact inversion
    return CachedGinv(cfg.assumed_match, std::exp(-18.0), std::exp(18.0), 2048);
}

inline double simulated_loglik(const Market& m, const std::vector<SearchRecord>& records,
                               const VecD& beta, const VecD& gamma, const LikelihoodConfig& cfg,
                               LikDiagnostics* diag = nullptr) {
    cfg.validate();
    const LikDraws draws = LikDraws::generate(m.n, m.J, cfg);
    const CachedGinv ginv = likelihood_ginv(cfg);
    return loglik_with_draws(m, records, beta, gamma, cfg, draws, ginv, diag);
}

inline EstimateReport estimate_likelihood(const Market& m,
                                          const std::vector<SearchRecord>& records,
                                          const LikelihoodConfig& cfg) {
    cfg.validate();
    const int qx = m.config.q_x, qz = m.config.q_z;
    const LikDraws draws = LikDraws::generate(m.n, m.J, cfg);
    const CachedGinv ginv = likelihood_ginv(cfg);

    auto negll = [&](const VecD& theta) {
        const VecD beta(theta.begin(), theta.begin() + qx);
        const VecD gamma(theta.begin() + qx, theta.end());
        return -loglik_with_draws(m, records, beta, gamma, cfg, draws, ginv);
    };
    VecD start(qx + qz, 0.0);
    const OptResult opt = bfgs_min(negll, start, cfg.opt);

    EstimateReport rep;
    rep.method = "likelihood";
    rep.seed = cfg.seed;
    rep.config_hash = fnv1a_hex(cfg.to_json_obj().dump());
    rep.n_rows = records.size() * static_cast<std::size_t>(m.J);
    rep.n_pairs = 0;
    rep.restarts = 1;
    rep.objective = -opt.f;
    rep.improved_over_starts = opt.f < negll(start);
    if (!opt.converged) rep.notes.push_back("optimizer stopped before meeting tolerances");

    LikDiagnostics diag;
    const VecD beta(opt.x.begin(), opt.x.begin() + qx);
    const VecD gamma(opt.x.begin() + qx, opt.x.end());
    loglik_with_draws(m, records, beta, gamma, cfg, draws, ginv, &diag);
    if (diag.floored > 0)
        rep.notes.push_back(std::to_string(diag.floored) + " consumers hit the probability floor");
    rep.notes.push_back(cfg.include_purchase ? "conditions: clicks + purchase"
                                             : "conditions: clicks only");

    const auto xn = m.config.effective_x_names();
    const auto zn = m.config.effective_z_names();
    for (int K = 0; K < qx; ++K) rep.coef_names.push_back("beta_" + xn[K]);
    for (int K = 0; K < qz; ++K) rep.coef_names.push_back("gamma_" + zn[K]);
    rep.raw_estimates = opt.x;

    // price-normalized utility coefficients (gamma stays raw: it enters the
    // cost exponent and is not on the utility scale)
    rep.estimates = opt.x;
    const double bp = std::abs(opt.x[0]);
    if (bp > 1e-12) {
        for (int K = 0; K < qx; ++K) rep.estimates[K] = opt.x[K] / bp;
    } else {
        rep.notes.push_back("price coefficient near zero; normalization skipped");
    }
    rep.extra["normalization"] = "utility coefficients divided by |beta_price|";
    return rep;
}

}  // namespace pmrank
