#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>

#include "pmrank/marginal_benefit.hpp"
#include "pmrank/pmr.hpp"
#include "pmrank/sieve_spec.hpp"

namespace pmrank {

// Workspace for the single-line rank objectives (known-G^-1, GQ, ZQ, DQ):
// value = C(n,2)^{-1} sum_{a<a~} [ 1{h_a > h_a~} 1{S_a > S_a~}
//                                + 1{h_a < h_a~} 1{S_a < S_a~} ]
// which, with discordant pairs stored S=1 row first, is the average of
// 1{h_hi > h_lo}. Values live in [0, 1].
class RankPairs {
   public:
    explicit RankPairs(const PairOutcomeTable& table, std::size_t pair_cap = 0,
                       std::uint64_t cap_seed = 1) {
        if (table.rows() < 2) throw DataError("rank objective needs at least 2 rows");
        n_rows_ = table.rows();
        order_.resize(n_rows_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            return table.consumer[a] < table.consumer[b];
        });
        total_pairs_ = n_rows_ * (n_rows_ - 1) / 2;
        std::vector<signed char> s(n_rows_);
        for (std::size_t r = 0; r < n_rows_; ++r) s[r] = table.s[order_[r]];

        if (pair_cap > 0 && total_pairs_ > pair_cap) {
            capped_ = true;
            denom_ = pair_cap;
            Rng rng = Rng::stream(cap_seed, 0x9A12u);
            std::unordered_set<std::uint64_t> chosen;
            while (chosen.size() < pair_cap) chosen.insert(rng.next_u64() % total_pairs_);
            std::vector<std::uint64_t> keys(chosen.begin(), chosen.end());
            std::sort(keys.begin(), keys.end());
            for (const std::uint64_t k : keys) {
                auto row_start = [&](std::uint64_t r) { return r * (2 * n_rows_ - r - 1) / 2; };
                std::uint64_t a = 0;
                // invert the triangular index
                std::uint64_t lo = 0, hi = n_rows_ - 1;
                while (lo < hi) {
                    const std::uint64_t mid = (lo + hi + 1) / 2;
                    if (row_start(mid) <= k)
                        lo = mid;
                    else
                        hi = mid - 1;
                }
                a = lo;
                const std::uint64_t b = k - row_start(a) + a + 1;
                push_pair(s, a, b);
            }
        } else {
            denom_ = total_pairs_;
            for (std::size_t a = 0; a + 1 < n_rows_; ++a)
                for (std::size_t b = a + 1; b < n_rows_; ++b) push_pair(s, a, b);
        }
    }

    std::size_t rows() const { return n_rows_; }
    std::size_t pairs_used() const { return denom_; }
    bool capped() const { return capped_; }
    const std::vector<std::size_t>& row_order() const { return order_; }

    // h must be indexed by canonical row position (row_order applied)
    double eval(const VecD& h, bool smooth = false, double bandwidth = 0.0) const {
        double acc = 0.0;
        if (smooth) {
            const double inv = 1.0 / bandwidth;
            for (const auto& [hi, lo] : pairs_) acc += logistic_cdf((h[hi] - h[lo]) * inv);
        } else {
            for (const auto& [hi, lo] : pairs_)
                if (h[hi] > h[lo]) acc += 1.0;
        }
        return acc / static_cast<double>(denom_);
    }

   private:
    void push_pair(const std::vector<signed char>& s, std::size_t a, std::size_t b) {
        if (s[a] == s[b]) return;
        if (s[a] > s[b])
            pairs_.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
        else
            pairs_.emplace_back(static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(a));
    }

    std::size_t n_rows_ = 0, total_pairs_ = 0, denom_ = 0;
    bool capped_ = false;
    std::vector<std::size_t> order_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_;
};

using GinvFn = std::function<double(double)>;

// h rows for the known-G^-1 objective
inline VecD known_ginv_index(const PairOutcomeTable& t, const RankPairs& rp, const VecD& b,
                             const VecD& m, const GinvFn& ginv_i, const GinvFn& ginv_j) {
    VecD h(t.rows());
    for (std::size_t p = 0; p < t.rows(); ++p) {
        const std::size_t r = rp.row_order()[p];
        double xb = 0.0;
        for (int k = 0; k < t.q_x; ++k) xb += (t.xi_at(r)[k] - t.xj_at(r)[k]) * b[k];
        const double ci = std::exp(dot(t.zi_at(r), m.data(), t.q_z));
        const double cj = std::exp(dot(t.zj_at(r), m.data(), t.q_z));
        h[p] = ginv_i(ci) - ginv_j(cj) + xb;
    }
    return h;
}

inline double known_ginv_objective(const PairOutcomeTable& t, const VecD& b, const VecD& m,
                                   const GinvFn& ginv_i, const GinvFn& ginv_j) {
    const RankPairs rp(t);
    return rp.eval(known_ginv_index(t, rp, b, m, ginv_i, ginv_j));
}

// h rows for the sieve objective (eq-13 style index)
inline VecD sieve_index(const PairOutcomeTable& t, const RankPairs& rp, const VecD& b,
                        const SieveSpec& sieve) {
    if (sieve.m.empty()) throw ConfigError("sieve index needs m in the spec");
    VecD h(t.rows());
    for (std::size_t p = 0; p < t.rows(); ++p) {
        const std::size_t r = rp.row_order()[p];
        double xb = 0.0;
        for (int k = 0; k < t.q_x; ++k) xb += (t.xi_at(r)[k] - t.xj_at(r)[k]) * b[k];
        const double ci = std::exp(dot(t.zi_at(r), sieve.m.data(), t.q_z));
        const double cj = std::exp(dot(t.zj_at(r), sieve.m.data(), t.q_z));
        h[p] = sieve.ginv_i(ci) - sieve.ginv_j(cj) + xb;
    }
    return h;
}

inline double sieve_objective(const PairOutcomeTable& t, const VecD& b, const SieveSpec& sieve) {
    sieve.validate();
    const RankPairs rp(t);
    return rp.eval(sieve_index(t, rp, b, sieve));
}

// Least-squares projection of a known inverse-benefit curve onto the sieve
// basis over [cost_lo, cost_hi]; used to seed tests and comparisons.
inline SieveSpec fit_sieve_to_function(const GinvFn& ginv, double cost_lo, double cost_hi,
                                       int degree = 3, int n_grid = 200) {
    if (!(cost_lo > 0.0) || !(cost_hi > cost_lo)) throw ConfigError("bad sieve fit range");
    SieveSpec s;
    s.degree = degree;
    s.shared = true;
    s.cost_lo = cost_lo;
    s.cost_hi = cost_hi;
    // standardization over the log-cost grid
    VecD logs(n_grid);
    for (int i = 0; i < n_grid; ++i)
        logs[i] = std::log(cost_lo) +
                  (std::log(cost_hi) - std::log(cost_lo)) * i / static_cast<double>(n_grid - 1);
    s.log_mean = mean(logs);
    s.log_sd = std::max(sample_sd(logs), 1e-12);

    const int p = degree + 1;
    std::vector<VecD> ata(p, VecD(p, 0.0));
    VecD aty(p, 0.0);
    for (int i = 0; i < n_grid; ++i) {
        const double t = (logs[i] - s.log_mean) / s.log_sd;
        VecD phi(p);
        phi[0] = 1.0;
        for (int n = 1; n < p; ++n) phi[n] = phi[n - 1] * t;
        const double y = ginv(std::exp(logs[i]));
        for (int r = 0; r < p; ++r) {
            aty[r] += phi[r] * y;
            for (int c = 0; c < p; ++c) ata[r][c] += phi[r] * phi[c];
        }
    }
    // Gaussian elimination with partial pivoting
    for (int col = 0; col < p; ++col) {
        int piv = col;
        for (int r = col + 1; r < p; ++r)
            if (std::abs(ata[r][col]) > std::abs(ata[piv][col])) piv = r;
        std::swap(ata[col], ata[piv]);
        std::swap(aty[col], aty[piv]);
        if (std::abs(ata[col][col]) < 1e-14) throw NumericError("rank-deficient sieve basis");
        for (int r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = ata[r][col] / ata[col][col];
            for (int c = col; c < p; ++c) ata[r][c] -= f * ata[col][c];
            aty[r] -= f * aty[col];
        }
    }
    s.coeff_i.assign(p, 0.0);
    for (int r = 0; r < p; ++r) s.coeff_i[r] = aty[r] / ata[r][r];
    s.validate();
    return s;
}

struct SieveEstimateConfig {
    int degree = 3;
    bool shared = true;
    int pin_index_b = 0;
    double pin_value_b = -1.0;  // preference normalization is mandatory here
    int pin_index_m = -1;       // -1: no pin, anchor m to unit norm
    double pin_value_m = 1.0;
    int restarts = 10;
    std::size_t pair_cap = 2000000;
    int min_obs = 50;
    double param_bandwidth = 0.0;  // 0 = N^-1/5 rule on pairs
    std::uint64_t seed = 1;
    NelderMeadOptions nm{400, 1e-11, 1e-7, 0.4};

    nlohmann::json to_json_obj() const {
        return nlohmann::json{{"spec_version", kSpecVersion}, {"degree", degree},
                              {"shared", shared},            {"pin_index_b", pin_index_b},
                              {"pin_value_b", pin_value_b},  {"pin_index_m", pin_index_m},
                              {"pin_value_m", pin_value_m},  {"restarts", restarts},
                              {"pair_cap", pair_cap},        {"min_obs", min_obs},
                              {"param_bandwidth", param_bandwidth}, {"seed", seed}};
    }
};

inline SieveEstimateConfig sieve_config_from_json(const nlohmann::json& j) {
    SieveEstimateConfig c;
    c.degree = j.value("degree", 3);
    c.shared = j.value("shared", true);
    c.pin_index_b = j.value("pin_index_b", 0);
    c.pin_value_b = j.value("pin_value_b", -1.0);
    c.pin_index_m = j.value("pin_index_m", -1);
    c.pin_value_m = j.value("pin_value_m", 1.0);
    c.restarts = j.value("restarts", 10);
    c.pair_cap = j.value("pair_cap", std::size_t{2000000});
    c.min_obs = j.value("min_obs", 50);
    c.param_bandwidth = j.value("param_bandwidth", 0.0);
    c.seed = j.value("seed", std::uint64_t{1});
    return c;
}

struct SieveEstimate {
    EstimateReport report;
    SieveSpec sieve;
};

namespace detail {

// scale-free sieve index used during optimization: log costs standardized
// with the trial m's own sample moments, so only the direction of m matters
struct SieveObjectiveEngine {
    const std::vector<PairOutcomeTable>& tables;
    std::vector<RankPairs> rank;
    std::vector<VecD> logc_i, logc_j, xdiff;  // canonical row order
    int qx, qz, degree;
    bool shared;

    SieveObjectiveEngine(const std::vector<PairOutcomeTable>& tabs, int deg, bool shared_coeff,
                         std::size_t pair_cap, std::uint64_t seed)
        : tables(tabs), qx(tabs.front().q_x), qz(tabs.front().q_z), degree(deg),
          shared(shared_coeff) {
        for (std::size_t t = 0; t < tables.size(); ++t) rank.emplace_back(tables[t], pair_cap, seed + t);
    }

    // moments of z'm pooled over both products and all tables
    std::pair<double, double> log_cost_moments(const VecD& m) const {
        double sum = 0.0, sum2 = 0.0;
        std::size_t count = 0;
        for (const auto& t : tables)
            for (std::size_t r = 0; r < t.rows(); ++r) {
                const double ti = dot(t.zi_at(r), m.data(), qz);
                const double tj = dot(t.zj_at(r), m.data(), qz);
                sum += ti + tj;
                sum2 += ti * ti + tj * tj;
                count += 2;
            }
        const double mu = sum / count;
        const double var = std::max(sum2 / count - mu * mu, 1e-24);
        return {mu, std::sqrt(var)};
    }

    // theta layout: [b_free (qx-1) | m (qz) | a_i (degree) | a_j (degree if !shared)]
    int dim(int pin_m) const {
        return (qx - 1) + (pin_m >= 0 ? qz - 1 : qz) + degree * (shared ? 1 : 2);
    }

    struct Unpacked {
        VecD b, m, ai, aj;  // ai/aj hold powers 1..degree (intercept fixed 0)
    };

    Unpacked unpack(const VecD& theta, int pin_b, double pin_bv, int pin_m, double pin_mv) const {
        Unpacked u;
        u.b.assign(qx, 0.0);
        u.m.assign(qz, 0.0);
        int p = 0;
        for (int k = 0; k < qx; ++k) u.b[k] = (k == pin_b) ? pin_bv : theta[p++];
        for (int k = 0; k < qz; ++k) u.m[k] = (k == pin_m) ? pin_mv : theta[p++];
        u.ai.assign(theta.begin() + p, theta.begin() + p + degree);
        p += degree;
        if (!shared) u.aj.assign(theta.begin() + p, theta.begin() + p + degree);
        return u;
    }

    double value(const Unpacked& u, bool smooth, double bandwidth) const {
        const auto [mu, sd] = log_cost_moments(u.m);
        double acc = 0.0;
        for (std::size_t t = 0; t < tables.size(); ++t) {
            const auto& tab = tables[t];
            const auto& rp = rank[t];
            VecD h(tab.rows());
            for (std::size_t p = 0; p < tab.rows(); ++p) {
                const std::size_t r = rp.row_order()[p];
                double xb = 0.0;
                for (int k = 0; k < qx; ++k) xb += (tab.xi_at(r)[k] - tab.xj_at(r)[k]) * u.b[k];
                const double ti = (dot(tab.zi_at(r), u.m.data(), qz) - mu) / sd;
                const double tj = (dot(tab.zj_at(r), u.m.data(), qz) - mu) / sd;
                double gi = 0.0, gj = 0.0, pi = 1.0, pj = 1.0;
                const VecD& aj = shared ? u.ai : u.aj;
                for (int n = 0; n < degree; ++n) {
                    pi *= ti;
                    pj *= tj;
                    gi += u.ai[n] * pi;
                    gj += aj[n] * pj;
                }
                h[p] = gi - gj + xb;
            }
            acc += rp.eval(h, smooth, bandwidth);
        }
        return acc;
    }
};

}  // namespace detail

// Joint maximization over (b, m, sieve coefficients) with the same
// surrogate-then-polish pipeline as the smoothed PMR estimator. The scale of
// m is not identified by a polynomial-in-log-cost basis (m -> c*m can be
// absorbed by the coefficients), so optimization runs on a standardized,
// scale-free index and the returned spec is re-anchored afterwards: to the
// configured pinned component when given, else to unit norm.
inline SieveEstimate estimate_sieve(const std::vector<PairOutcomeTable>& tables,
                                    const SieveEstimateConfig& cfg) {
    if (tables.empty()) throw DataError("estimate_sieve: no tables");
    const int qx = tables.front().q_x;
    const int qz = tables.front().q_z;
    std::size_t total_rows = 0;
    for (const auto& t : tables) total_rows += t.rows();
    if (total_rows < static_cast<std::size_t>(cfg.min_obs))
        throw DataError("estimate_sieve: insufficient rows");

    detail::SieveObjectiveEngine eng(tables, cfg.degree, cfg.shared, cfg.pair_cap, cfg.seed);
    std::size_t pairs = 0;
    for (const auto& rp : eng.rank) pairs += rp.pairs_used();
    const double bw =
        cfg.param_bandwidth > 0.0 ? cfg.param_bandwidth : default_bandwidth(pairs);

    auto neg_surrogate = [&](const VecD& theta) {
        const auto u = eng.unpack(theta, cfg.pin_index_b, cfg.pin_value_b, cfg.pin_index_m,
                                  cfg.pin_value_m);
        if (norm2(u.m) < 1e-10) return 1e100;
        return -eng.value(u, true, bw);
    };
    auto sharp = [&](const VecD& theta) {
        const auto u = eng.unpack(theta, cfg.pin_index_b, cfg.pin_value_b, cfg.pin_index_m,
                                  cfg.pin_value_m);
        if (norm2(u.m) < 1e-10) return -1e100;
        return eng.value(u, false, 0.0);
    };

    const int dim = eng.dim(cfg.pin_index_m);
    Rng rng = Rng::stream(cfg.seed, 0x51EBEu);
    std::vector<VecD> starts;
    {
        // natural start: zero preferences, pin-consistent m, decreasing sieve
        VecD s0(dim, 0.0);
        const int a_off = (qx - 1) + (cfg.pin_index_m >= 0 ? qz - 1 : qz);
        s0[a_off] = -1.0;  // linear term negative (Lemma 1 shape)
        if (cfg.pin_index_m < 0) s0[qx - 1] = 1.0;  // some m direction
        if (!cfg.shared) s0[a_off + cfg.degree] = -1.0;
        starts.push_back(s0);
    }
    while (static_cast<int>(starts.size()) < std::max(cfg.restarts, 1))
        starts.push_back(detail::random_direction(rng, dim));

    VecD best_theta;
    double best_val = -1e300;
    double best_start_val = -1e300;
    int agree = 0, solutions = 0;
    std::vector<VecD> sols;
    for (const auto& s : starts) {
        best_start_val = std::max(best_start_val, sharp(s));
        const OptResult r = nelder_mead_min(neg_surrogate, s, cfg.nm);
        const double v = sharp(r.x);
        sols.push_back(r.x);
        ++solutions;
        if (v > best_val) {
            best_val = v;
            best_theta = r.x;
        }
    }
    for (const auto& s : sols) {
        double d = 0.0;
        for (int k = 0; k < dim; ++k) d = std::max(d, std::abs(s[k] - best_theta[k]));
        if (d <= 0.05) ++agree;
    }

    auto u = eng.unpack(best_theta, cfg.pin_index_b, cfg.pin_value_b, cfg.pin_index_m,
                        cfg.pin_value_m);

    // re-anchor m: the optimizer's index only pins the direction
    SieveSpec spec;
    spec.degree = cfg.degree;
    spec.shared = cfg.shared;
    VecD m_hat = u.m;
    std::string axis;
    const double mn = norm2(m_hat);
    if (mn < 1e-12) throw NumericError("estimate_sieve: degenerate m");
    if (cfg.pin_index_m >= 0) {
        axis = "pinned m[" + std::to_string(cfg.pin_index_m) + "]=" +
               std::to_string(cfg.pin_value_m);
        // pinned during optimization; nothing to rescale
    } else {
        for (double& v : m_hat) v /= mn;
        axis = "unit_norm_m";
    }
    const auto [mu, sd] = eng.log_cost_moments(u.m);
    // the standardized index is invariant to positive rescaling of m, so the
    // re-anchored spec stores the anchored moments
    double mu_hat = mu, sd_hat = sd;
    if (cfg.pin_index_m < 0) {
        mu_hat = mu / mn;
        sd_hat = sd / mn;
    }
    spec.m = m_hat;
    spec.log_mean = mu_hat;
    spec.log_sd = sd_hat;
    spec.coeff_i.assign(cfg.degree + 1, 0.0);
    for (int n = 0; n < cfg.degree; ++n) spec.coeff_i[n + 1] = u.ai[n];
    if (!cfg.shared) {
        spec.coeff_j.assign(cfg.degree + 1, 0.0);
        for (int n = 0; n < cfg.degree; ++n) spec.coeff_j[n + 1] = u.aj[n];
    }

    // observed cost range under the anchored m
    double c_lo = 1e300, c_hi = -1e300;
    for (const auto& t : tables)
        for (std::size_t r = 0; r < t.rows(); ++r) {
            for (const double c : {std::exp(dot(t.zi_at(r), m_hat.data(), qz)),
                                   std::exp(dot(t.zj_at(r), m_hat.data(), qz))}) {
                c_lo = std::min(c_lo, c);
                c_hi = std::max(c_hi, c);
            }
        }
    spec.cost_lo = c_lo;
    spec.cost_hi = c_hi;
    spec.cost_axis = axis;
    spec.validate();

    // post-hoc Lemma 1 shape check on the central 90% of observed costs;
    // monotonicity is deliberately not imposed during optimization
    int violations = 0;
    {
        const double l_lo = std::log(c_lo) + 0.05 * (std::log(c_hi) - std::log(c_lo));
        const double l_hi = std::log(c_hi) - 0.05 * (std::log(c_hi) - std::log(c_lo));
        double prev = spec.ginv_i(std::exp(l_lo));
        const int grid = 64;
        for (int g = 1; g < grid; ++g) {
            const double c = std::exp(l_lo + (l_hi - l_lo) * g / (grid - 1.0));
            const double v = spec.ginv_i(c);
            if (v >= prev) ++violations;
            prev = v;
        }
    }

    SieveEstimate out;
    out.sieve = spec;
    auto& rep = out.report;
    rep.method = "sieve";
    rep.seed = cfg.seed;
    rep.config_hash = fnv1a_hex(cfg.to_json_obj().dump());
    rep.n_rows = total_rows;
    rep.n_pairs = pairs;
    rep.restarts = solutions;
    rep.agree_fraction = solutions > 0 ? static_cast<double>(agree) / solutions : 0.0;
    rep.objective = best_val;
    rep.improved_over_starts = best_val > best_start_val + 1e-15;
    const auto xn = tables.front().x_names;
    const auto zn = tables.front().z_names;
    for (int k = 0; k < qx; ++k)
        rep.coef_names.push_back(k < static_cast<int>(xn.size()) ? "beta_" + xn[k]
                                                                 : "beta_x" + std::to_string(k));
    for (int k = 0; k < qz; ++k)
        rep.coef_names.push_back(k < static_cast<int>(zn.size()) ? "gamma_" + zn[k]
                                                                 : "gamma_z" + std::to_string(k));
    rep.estimates = u.b;
    rep.estimates.insert(rep.estimates.end(), m_hat.begin(), m_hat.end());
    rep.raw_estimates = rep.estimates;
    rep.extra["sieve"] = spec;
    rep.extra["monotone_violations"] = violations;
    rep.extra["cost_axis"] = axis;
    if (violations > 0)
        rep.notes.push_back("fitted G^-1 not decreasing at " + std::to_string(violations) +
                            "/63 grid steps");
    if (eng.rank.front().capped()) rep.notes.push_back("pair cap applied");
    return out;
}

// Four-step match-value-distribution test: candidate G~^-1 curves against
// the fitted sieve on a shared cost grid. The level of G^-1 is not
// identified by rank objectives, so summary statistics are computed on
// level-centered errors; raw curves are reported alongside.
struct MvdCandidateResult {
    std::string name;
    VecD ginv_values;
    VecD error_raw;
    double sup_raw = 0.0;
    double sup_centered = 0.0;
    double l2_centered = 0.0;
    bool rejected = false;
};

struct MvdTestReport {
    VecD grid_costs;
    VecD fitted_values;
    std::vector<MvdCandidateResult> candidates;
    int best_index = -1;  // smallest centered L2
    std::optional<double> sup_threshold;

    nlohmann::json to_json_obj() const {
        nlohmann::json cands = nlohmann::json::array();
        for (const auto& c : candidates)
            cands.push_back({{"name", c.name},
                             {"ginv_values", c.ginv_values},
                             {"error_raw", c.error_raw},
                             {"sup_raw", c.sup_raw},
                             {"sup_centered", c.sup_centered},
                             {"l2_centered", c.l2_centered},
                             {"rejected", c.rejected}});
        nlohmann::json j{{"spec_version", kSpecVersion},
                         {"grid_costs", grid_costs},
                         {"fitted_values", fitted_values},
                         {"candidates", cands},
                         {"best_index", best_index}};
        if (sup_threshold) j["sup_threshold"] = *sup_threshold;
        return j;
    }
};

inline MvdTestReport mvd_test(const std::vector<MatchValueDist>& candidates,
                              const SieveSpec& fitted, int grid_n = 101, double cost_lo = 0.0,
                              double cost_hi = 0.0,
                              std::optional<double> sup_threshold = std::nullopt) {
    fitted.validate();
    if (candidates.empty()) throw ConfigError("mvd_test needs at least one candidate");
    if (grid_n < 2) throw ConfigError("mvd_test needs grid_n >= 2");
    if (cost_lo <= 0.0) cost_lo = fitted.cost_lo;
    if (cost_hi <= 0.0) cost_hi = fitted.cost_hi;
    if (!(cost_lo > 0.0) || !(cost_hi > cost_lo))
        throw ConfigError("mvd_test grid bounds are invalid");
    if (cost_lo < fitted.cost_lo - 1e-12 || cost_hi > fitted.cost_hi + 1e-12)
        throw ConfigError("mvd_test grid outside the fitted sieve domain");

    MvdTestReport rep;
    rep.sup_threshold = sup_threshold;
    rep.grid_costs.resize(grid_n);
    rep.fitted_values.resize(grid_n);
    for (int g = 0; g < grid_n; ++g) {
        const double lc =
            std::log(cost_lo) + (std::log(cost_hi) - std::log(cost_lo)) * g / (grid_n - 1.0);
        rep.grid_costs[g] = std::exp(lc);
    }
    rep.grid_costs.front() = cost_lo;  // exact requested bounds
    rep.grid_costs.back() = cost_hi;
    for (int g = 0; g < grid_n; ++g) rep.fitted_values[g] = fitted.ginv_i(rep.grid_costs[g]);

    double best_l2 = 1e300;
    for (const auto& cand : candidates) {
        MvdCandidateResult res;
        res.name = cand.name();
        res.ginv_values.resize(grid_n);
        res.error_raw.resize(grid_n);
        for (int g = 0; g < grid_n; ++g) {
            double v;
            if (cand.family() == DistFamily::Sieve) {
                if (!cand.sieve_spec().in_domain(rep.grid_costs[g]))
                    throw NumericError("candidate sieve does not cover the grid");
                v = cand.sieve_spec().ginv_i(rep.grid_costs[g]);
            } else {
                v = inverse_marginal_benefit(rep.grid_costs[g], cand);
            }
            res.ginv_values[g] = v;
            res.error_raw[g] = v - rep.fitted_values[g];
        }
        const double offset = mean(res.error_raw);
        double sup_raw = 0.0, sup_c = 0.0, l2 = 0.0;
        for (double e : res.error_raw) {
            sup_raw = std::max(sup_raw, std::abs(e));
            const double c = e - offset;
            sup_c = std::max(sup_c, std::abs(c));
            l2 += c * c;
        }
        res.sup_raw = sup_raw;
        res.sup_centered = sup_c;
        res.l2_centered = std::sqrt(l2 / grid_n);
        if (sup_threshold) res.rejected = res.sup_centered > *sup_threshold;
        if (res.l2_centered < best_l2) {
            best_l2 = res.l2_centered;
            rep.best_index = static_cast<int>(rep.candidates.size());
        }
        rep.candidates.push_back(std::move(res));
    }
    return rep;
}

}  // namespace pmrank
