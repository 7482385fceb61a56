#pragma once

#include <algorithm>
#include <cstring>
#include <numeric>
#include <set>
#include <unordered_set>

#include "pmrank/common.hpp"
#include "pmrank/distributions.hpp"
#include "pmrank/market.hpp"
#include "pmrank/optimize.hpp"
#include "pmrank/report.hpp"
#include "pmrank/rng.hpp"

namespace pmrank {

// Matching kernel K (standard normal pdf shape) and the optional logistic
// smoother K~ applied to the parameter indicators.
inline double match_kernel(double v) { return normal_pdf(v); }

inline double logistic_cdf(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

struct SmoothingSpec {
    double bandwidth = 0.0;        // sigma for the covariate-matching kernel
    bool smooth_params = false;    // smooth the parameter indicators with K~
    double param_bandwidth = 0.0;  // sigma~ for K~

    void validate() const {
        if (!(bandwidth > 0.0)) throw ConfigError("smoothing bandwidth must be positive");
        if (smooth_params && !(param_bandwidth > 0.0))
            throw ConfigError("parameter smoother bandwidth must be positive");
    }
};

inline double default_bandwidth(std::size_t n_pairs) {
    return std::pow(static_cast<double>(std::max<std::size_t>(n_pairs, 1)), -0.2);
}

// Precomputed pairwise terms for one outcome table. Rows are canonicalized
// by consumer id; only discordant pairs (S_a != S_a~) carry weight, stored
// with the S=1 row first so each term contributes
//   w1 * 1{xb_hi > xb_lo} + w2 * 1{zjm_hi > zjm_lo} + w3 * 1{zim_hi < zim_lo}
// and the objective is the average over all enumerated (or subsampled) pairs.
class PairWorkspace {
   public:
    PairWorkspace(const PairOutcomeTable& table, const SmoothingSpec* smoothing,
                  std::size_t pair_cap = 0, std::uint64_t cap_seed = 1) {
        if (table.rows() < 2) throw DataError("objective needs at least 2 rows");
        qx_ = table.q_x;
        qz_ = table.q_z;
        n_rows_ = table.rows();

        // canonical row order: ascending consumer id
        std::vector<std::size_t> order(n_rows_);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return table.consumer[a] < table.consumer[b];
        });

        xdiff_.resize(n_rows_ * qx_);
        zi_.resize(n_rows_ * qz_);
        zj_.resize(n_rows_ * qz_);
        s_.resize(n_rows_);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            const std::size_t src = order[r];
            for (int k = 0; k < qx_; ++k)
                xdiff_[r * qx_ + k] = table.xi_at(src)[k] - table.xj_at(src)[k];
            std::memcpy(&zi_[r * qz_], table.zi_at(src), sizeof(double) * qz_);
            std::memcpy(&zj_[r * qz_], table.zj_at(src), sizeof(double) * qz_);
            s_[r] = table.s[src];
        }

        total_pairs_ = n_rows_ * (n_rows_ - 1) / 2;
        std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
        if (pair_cap > 0 && total_pairs_ > pair_cap) {
            capped_ = true;
            denom_pairs_ = pair_cap;
            pairs = sample_pairs(pair_cap, cap_seed);
        } else {
            denom_pairs_ = total_pairs_;
            pairs.reserve(total_pairs_);
            for (std::uint32_t a = 0; a + 1 < n_rows_; ++a)
                for (std::uint32_t b = a + 1; b < n_rows_; ++b) pairs.emplace_back(a, b);
        }

        terms_.reserve(pairs.size() / 2);
        for (const auto& [a, b] : pairs) {
            if (s_[a] == s_[b]) continue;  // concordant pairs contribute zero
            const std::uint32_t hi = s_[a] > s_[b] ? a : b;
            const std::uint32_t lo = s_[a] > s_[b] ? b : a;
            Term t;
            t.hi = hi;
            t.lo = lo;
            if (smoothing) {
                const double inv = 1.0 / smoothing->bandwidth;
                t.w1 = match_kernel(stack_dist_zz(hi, lo) * inv);
                t.w2 = match_kernel(stack_dist(zi_, hi, lo) * inv);
                t.w3 = match_kernel(stack_dist(zj_, hi, lo) * inv);
            } else {
                const bool zi_eq = rows_equal(zi_, hi, lo, qz_);
                const bool zj_eq = rows_equal(zj_, hi, lo, qz_);
                const bool x_eq = rows_equal(xdiff_, hi, lo, qx_);
                t.w1 = (zi_eq && zj_eq) ? 1.0 : 0.0;
                t.w2 = (zi_eq && x_eq) ? 1.0 : 0.0;
                t.w3 = (zj_eq && x_eq) ? 1.0 : 0.0;
            }
            if (t.w1 != 0.0 || t.w2 != 0.0 || t.w3 != 0.0) terms_.push_back(t);
        }
    }

    std::size_t rows() const { return n_rows_; }
    std::size_t pairs_used() const { return denom_pairs_; }
    std::size_t total_pairs() const { return total_pairs_; }
    bool capped() const { return capped_; }

    double eval(const VecD& b, const VecD& m, bool smooth_params = false,
                double param_bandwidth = 0.0) const {
        if (static_cast<int>(b.size()) != qx_ || static_cast<int>(m.size()) != qz_)
            throw NumericError("objective parameter dimension mismatch");
        VecD xb(n_rows_), zim(n_rows_), zjm(n_rows_);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            xb[r] = dot(&xdiff_[r * qx_], b.data(), qx_);
            zim[r] = dot(&zi_[r * qz_], m.data(), qz_);
            zjm[r] = dot(&zj_[r * qz_], m.data(), qz_);
        }
        double acc = 0.0;
        if (smooth_params) {
            const double inv = 1.0 / param_bandwidth;
            for (const Term& t : terms_) {
                acc += t.w1 * logistic_cdf((xb[t.hi] - xb[t.lo]) * inv);
                acc += t.w2 * logistic_cdf((zjm[t.hi] - zjm[t.lo]) * inv);
                acc += t.w3 * logistic_cdf((zim[t.lo] - zim[t.hi]) * inv);
            }
        } else {
            for (const Term& t : terms_) {
                if (xb[t.hi] > xb[t.lo]) acc += t.w1;
                if (zjm[t.hi] > zjm[t.lo]) acc += t.w2;
                if (zim[t.hi] < zim[t.lo]) acc += t.w3;
            }
        }
        return acc / static_cast<double>(denom_pairs_);
    }

   private:
    struct Term {
        std::uint32_t hi, lo;
        double w1, w2, w3;
    };

    static bool rows_equal(const VecD& v, std::size_t a, std::size_t b, int q) {
        for (int k = 0; k < q; ++k)
            if (v[a * q + k] != v[b * q + k]) return false;
        return true;
    }

    double stack_dist_zz(std::size_t a, std::size_t b) const {
        double d2 = 0.0;
        for (int k = 0; k < qz_; ++k) {
            const double d1 = zi_[a * qz_ + k] - zi_[b * qz_ + k];
            const double d2b = zj_[a * qz_ + k] - zj_[b * qz_ + k];
            d2 += d1 * d1 + d2b * d2b;
        }
        return std::sqrt(d2);
    }

    // || (z_row, xdiff_row)_a - (z_row, xdiff_row)_b ||
    double stack_dist(const VecD& zrows, std::size_t a, std::size_t b) const {
        double d2 = 0.0;
        for (int k = 0; k < qz_; ++k) {
            const double d = zrows[a * qz_ + k] - zrows[b * qz_ + k];
            d2 += d * d;
        }
        for (int k = 0; k < qx_; ++k) {
            const double d = xdiff_[a * qx_ + k] - xdiff_[b * qx_ + k];
            d2 += d * d;
        }
        return std::sqrt(d2);
    }

    // uniform sample of distinct pair indices from the C(n,2) triangle
    std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_pairs(std::size_t count,
                                                                      std::uint64_t seed) const {
        Rng rng = Rng::stream(seed, 0xBEEFu);
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(count * 2);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
        out.reserve(count);
        while (out.size() < count) {
            const std::uint64_t k = rng.next_u64() % total_pairs_;
            if (!chosen.insert(k).second) continue;
            // decode linear index into (a, b), a < b
            const double kd = static_cast<double>(k);
            const double nd = static_cast<double>(n_rows_);
            std::uint32_t a = static_cast<std::uint32_t>(
                nd - 2.0 - std::floor(std::sqrt(-8.0 * kd + 4.0 * nd * (nd - 1.0) - 7.0) / 2.0 - 0.5));
            // guard against floating rounding at the boundaries
            auto row_start = [&](std::uint64_t r) {
                return r * (2 * n_rows_ - r - 1) / 2;
            };
            while (a > 0 && row_start(a) > k) --a;
            while (row_start(a + 1) <= k) ++a;
            const std::uint32_t b = static_cast<std::uint32_t>(k - row_start(a) + a + 1);
            out.emplace_back(a, b);
        }
        // canonical order so results do not depend on hash-set iteration
        std::sort(out.begin(), out.end());
        return out;
    }

    int qx_ = 0, qz_ = 0;
    std::size_t n_rows_ = 0;
    std::size_t total_pairs_ = 0;
    std::size_t denom_pairs_ = 0;
    bool capped_ = false;
    VecD xdiff_, zi_, zj_;
    std::vector<signed char> s_;
    std::vector<Term> terms_;
};

// Exact-matching objective (value in [0, 3]); the smoothed version replaces
// the exact-match indicators with kernel weights of the stacked covariate
// distance.
inline double ideal_objective(const PairOutcomeTable& table, const VecD& b, const VecD& m) {
    return PairWorkspace(table, nullptr).eval(b, m);
}

inline double smoothed_objective(const PairOutcomeTable& table, const VecD& b, const VecD& m,
                                 const SmoothingSpec& smoothing) {
    smoothing.validate();
    return PairWorkspace(table, &smoothing).eval(b, m, smoothing.smooth_params,
                                                 smoothing.param_bandwidth);
}

inline double multi_pair_objective(const std::vector<PairOutcomeTable>& tables, const VecD& b,
                                   const VecD& m, const SmoothingSpec& smoothing) {
    if (tables.empty()) throw DataError("multi_pair_objective needs at least one table");
    double acc = 0.0;
    for (const auto& t : tables) acc += smoothed_objective(t, b, m, smoothing);
    return acc;
}

// Parameter-space normalization. UnitNorm is Theta_rho (both directions unit
// norm, first components bounded away from zero); Fixed pins one component
// of each vector at a known value.
struct Normalization {
    enum class Mode { UnitNorm, Fixed };
    Mode mode = Mode::Fixed;
    double rho = 0.1;
    int pin_index_b = 0;
    double pin_value_b = -1.0;
    int pin_index_m = 0;
    double pin_value_m = 1.0;

    int free_dim(int qx, int qz) const {
        return mode == Mode::UnitNorm ? qx + qz : (qx - 1) + (qz - 1);
    }

    // returns false when theta is outside the admissible set
    bool unpack(const VecD& theta, int qx, int qz, VecD& b, VecD& m) const {
        b.assign(qx, 0.0);
        m.assign(qz, 0.0);
        if (mode == Mode::UnitNorm) {
            VecD vb(theta.begin(), theta.begin() + qx);
            VecD vm(theta.begin() + qx, theta.end());
            const double nb = norm2(vb), nm = norm2(vm);
            if (!(nb > 1e-12) || !(nm > 1e-12)) return false;
            for (int k = 0; k < qx; ++k) b[k] = vb[k] / nb;
            for (int k = 0; k < qz; ++k) m[k] = vm[k] / nm;
            return std::abs(b[0]) >= rho && std::abs(m[0]) >= rho;
        }
        int p = 0;
        for (int k = 0; k < qx; ++k) b[k] = (k == pin_index_b) ? pin_value_b : theta[p++];
        for (int k = 0; k < qz; ++k) m[k] = (k == pin_index_m) ? pin_value_m : theta[p++];
        return true;
    }

    VecD pack(const VecD& b, const VecD& m) const {
        if (mode == Mode::UnitNorm) {
            VecD theta(b);
            theta.insert(theta.end(), m.begin(), m.end());
            return theta;
        }
        VecD theta;
        for (int k = 0; k < static_cast<int>(b.size()); ++k)
            if (k != pin_index_b) theta.push_back(b[k]);
        for (int k = 0; k < static_cast<int>(m.size()); ++k)
            if (k != pin_index_m) theta.push_back(m[k]);
        return theta;
    }
};

inline void to_json(nlohmann::json& j, const Normalization& n) {
    j = nlohmann::json{{"mode", n.mode == Normalization::Mode::UnitNorm ? "unit_norm" : "fixed"},
                       {"rho", n.rho},
                       {"pin_index_b", n.pin_index_b},
                       {"pin_value_b", n.pin_value_b},
                       {"pin_index_m", n.pin_index_m},
                       {"pin_value_m", n.pin_value_m}};
}

inline void from_json(const nlohmann::json& j, Normalization& n) {
    const std::string mode = j.value("mode", "fixed");
    if (mode == "unit_norm")
        n.mode = Normalization::Mode::UnitNorm;
    else if (mode == "fixed")
        n.mode = Normalization::Mode::Fixed;
    else
        throw ConfigError("unknown normalization mode: " + mode);
    n.rho = j.value("rho", 0.1);
    n.pin_index_b = j.value("pin_index_b", 0);
    n.pin_value_b = j.value("pin_value_b", -1.0);
    n.pin_index_m = j.value("pin_index_m", 0);
    n.pin_value_m = j.value("pin_value_m", 1.0);
}

struct PmrEstimateConfig {
    Normalization norm;
    double bandwidth = 0.0;        // 0 = per-table N_pairs^(-1/5)
    double param_bandwidth = 0.0;  // 0 = same rule
    int restarts = 20;
    std::size_t pair_cap = 2000000;
    int min_obs = 50;
    std::uint64_t seed = 1;
    NelderMeadOptions nm{400, 1e-11, 1e-7, 0.5};

    nlohmann::json to_json_obj() const {
        return nlohmann::json{{"spec_version", kSpecVersion},
                              {"norm", norm},
                              {"bandwidth", bandwidth},
                              {"param_bandwidth", param_bandwidth},
                              {"restarts", restarts},
                              {"pair_cap", pair_cap},
                              {"min_obs", min_obs},
                              {"seed", seed}};
    }
};

inline PmrEstimateConfig pmr_config_from_json(const nlohmann::json& j) {
    PmrEstimateConfig c;
    if (j.contains("norm")) c.norm = j.at("norm").get<Normalization>();
    c.bandwidth = j.value("bandwidth", 0.0);
    c.param_bandwidth = j.value("param_bandwidth", 0.0);
    c.restarts = j.value("restarts", 20);
    c.pair_cap = j.value("pair_cap", std::size_t{2000000});
    c.min_obs = j.value("min_obs", 50);
    c.seed = j.value("seed", std::uint64_t{1});
    return c;
}

namespace detail {

inline VecD random_direction(Rng& rng, int dim) {
    VecD v(dim);
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (int k = 0; k < dim; ++k) {
            v[k] = rng.normal();
            n2 += v[k] * v[k];
        }
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    return v;
}

}  // namespace detail

// Smoothed PMR estimation: multi-start Nelder-Mead on the K~-smoothed
// surrogate, then the candidate set is re-scored on the sharp smoothed
// objective and the argmax is returned.
inline EstimateReport estimate_pmr(const std::vector<PairOutcomeTable>& tables,
                                   const PmrEstimateConfig& cfg) {
    if (tables.empty()) throw DataError("estimate_pmr: no tables");
    const int qx = tables.front().q_x;
    const int qz = tables.front().q_z;
    std::size_t total_rows = 0;
    for (const auto& t : tables) total_rows += t.rows();
    if (total_rows < static_cast<std::size_t>(cfg.min_obs))
        throw DataError("estimate_pmr: " + std::to_string(total_rows) +
                        " rows < min_obs=" + std::to_string(cfg.min_obs));

    EstimateReport rep;
    rep.method = "pmr";
    rep.seed = cfg.seed;
    rep.config_hash = fnv1a_hex(cfg.to_json_obj().dump());
    rep.n_rows = total_rows;

    // per-table workspaces and bandwidths
    std::vector<PairWorkspace> ws;
    VecD bw, pbw;
    SmoothingSpec probe{1.0, false, 0.0};
    for (std::size_t t = 0; t < tables.size(); ++t) {
        ws.emplace_back(tables[t], &probe, cfg.pair_cap, cfg.seed + t);
        const double sigma =
            cfg.bandwidth > 0.0 ? cfg.bandwidth : default_bandwidth(ws.back().pairs_used());
        bw.push_back(sigma);
        pbw.push_back(cfg.param_bandwidth > 0.0 ? cfg.param_bandwidth : sigma);
        rep.n_pairs += ws.back().pairs_used();
        if (ws.back().capped())
            rep.notes.push_back("pair cap applied to table " + std::to_string(t) + ": " +
                                std::to_string(ws.back().pairs_used()) + " of " +
                                std::to_string(ws.back().total_pairs()) + " pairs");
    }
    // kernel weights depend on the bandwidth, so rebuild with the final ones
    ws.clear();
    for (std::size_t t = 0; t < tables.size(); ++t) {
        SmoothingSpec s{bw[t], false, 0.0};
        ws.emplace_back(tables[t], &s, cfg.pair_cap, cfg.seed + t);
    }

    // Assumption 2(b) diagnostic: distinct values of the designated
    // continuous components cannot be asserted, only counted.
    {
        std::set<double> xvals, zvals;
        for (const auto& t : tables)
            for (std::size_t r = 0; r < t.rows(); ++r) {
                xvals.insert(t.xi_at(r)[0] - t.xj_at(r)[0]);
                zvals.insert(t.zi_at(r)[0]);
            }
        rep.notes.push_back("distinct first-component values: x_diff=" +
                            std::to_string(xvals.size()) + " z_i=" + std::to_string(zvals.size()));
    }

    auto objective = [&](const VecD& b, const VecD& m, bool smooth) {
        double acc = 0.0;
        for (std::size_t t = 0; t < ws.size(); ++t)
            acc += ws[t].eval(b, m, smooth, pbw[t]);
        return acc;
    };
    auto surrogate_neg = [&](const VecD& theta) {
        VecD b, m;
        if (!cfg.norm.unpack(theta, qx, qz, b, m)) return 1e100;
        return -objective(b, m, true);
    };

    // start set: zero/pin start plus random directions on the unit sphere
    const int dim = cfg.norm.free_dim(qx, qz);
    Rng rng = Rng::stream(cfg.seed, 0x57A27u);
    std::vector<VecD> starts;
    if (cfg.norm.mode == Normalization::Mode::UnitNorm) {
        VecD axis(dim, 0.0);
        axis[0] = 1.0;
        axis[qx] = 1.0;
        starts.push_back(axis);
    } else {
        starts.push_back(VecD(dim, 0.0));
    }
    while (static_cast<int>(starts.size()) < std::max(cfg.restarts, 1)) {
        VecD v = detail::random_direction(rng, dim);
        if (cfg.norm.mode == Normalization::Mode::UnitNorm) {
            VecD b, m;
            if (!cfg.norm.unpack(v, qx, qz, b, m)) continue;
        }
        starts.push_back(std::move(v));
    }

    struct Candidate {
        VecD theta;
        double sharp;
        bool from_start;
    };
    std::vector<Candidate> cands;
    for (const auto& s : starts) {
        VecD b, m;
        if (cfg.norm.unpack(s, qx, qz, b, m))
            cands.push_back({s, objective(b, m, false), true});
        const OptResult r = nelder_mead_min(surrogate_neg, s, cfg.nm);
        VecD br, mr;
        if (cfg.norm.unpack(r.x, qx, qz, br, mr))
            cands.push_back({r.x, objective(br, mr, false), false});
    }
    if (cands.empty()) throw NumericError("estimate_pmr: no admissible candidate");

    const auto best = std::max_element(cands.begin(), cands.end(),
                                       [](const Candidate& a, const Candidate& b) {
                                           return a.sharp < b.sharp;
                                       });
    double best_start_value = -1e300;
    for (const auto& c : cands)
        if (c.from_start) best_start_value = std::max(best_start_value, c.sharp);
    rep.improved_over_starts = best->sharp > best_start_value + 1e-15;
    if (!rep.improved_over_starts)
        rep.notes.push_back("optimizer did not improve over the start set");

    // agreement across restart solutions, on the normalized parameter scale
    int agree = 0, solutions = 0;
    for (const auto& c : cands) {
        if (c.from_start) continue;
        ++solutions;
        double dist = 0.0;
        VecD b1, m1, b2, m2;
        cfg.norm.unpack(c.theta, qx, qz, b1, m1);
        cfg.norm.unpack(best->theta, qx, qz, b2, m2);
        for (int k = 0; k < qx; ++k) dist = std::max(dist, std::abs(b1[k] - b2[k]));
        for (int k = 0; k < qz; ++k) dist = std::max(dist, std::abs(m1[k] - m2[k]));
        if (dist <= 0.05) ++agree;
    }
    rep.restarts = solutions;
    rep.agree_fraction = solutions > 0 ? static_cast<double>(agree) / solutions : 0.0;

    VecD b, m;
    cfg.norm.unpack(best->theta, qx, qz, b, m);
    rep.objective = best->sharp;
    rep.coef_names.clear();
    const auto xn = tables.front().x_names;
    const auto zn = tables.front().z_names;
    for (int k = 0; k < qx; ++k)
        rep.coef_names.push_back(k < static_cast<int>(xn.size()) ? "beta_" + xn[k]
                                                                 : "beta_x" + std::to_string(k));
    for (int k = 0; k < qz; ++k)
        rep.coef_names.push_back(k < static_cast<int>(zn.size()) ? "gamma_" + zn[k]
                                                                 : "gamma_z" + std::to_string(k));
    rep.estimates = b;
    rep.estimates.insert(rep.estimates.end(), m.begin(), m.end());
    rep.raw_estimates = rep.estimates;
    return rep;
}

}  // namespace pmrank
