#pragma once

#include <algorithm>
#include <functional>

#include "pmrank/sieve.hpp"

namespace pmrank {

// ---- ZQ: search cost variables entering utility -------------------------

// h = sieve terms + x_aij'b + zu_aij'b_z, where zu is the designated subset
// of z columns. With b_z = 0 the added term is exactly +0.0 and the value
// reduces bitwise to sieve_objective.
inline VecD zq_index(const PairOutcomeTable& t, const RankPairs& rp, const VecD& b,
                     const VecD& b_z, const std::vector<int>& zu_indices,
                     const SieveSpec& sieve) {
    for (int k : zu_indices)
        if (k < 0 || k >= t.q_z) throw ConfigError("zu index outside z columns");
    if (b_z.size() != zu_indices.size()) throw ConfigError("b_z size != zu subset size");
    VecD h = sieve_index(t, rp, b, sieve);
    for (std::size_t p = 0; p < t.rows(); ++p) {
        const std::size_t r = rp.row_order()[p];
        double extra = 0.0;
        for (std::size_t k = 0; k < zu_indices.size(); ++k)
            extra += (t.zi_at(r)[zu_indices[k]] - t.zj_at(r)[zu_indices[k]]) * b_z[k];
        h[p] += extra;
    }
    return h;
}

inline double zq_objective(const PairOutcomeTable& t, const VecD& b, const VecD& b_z,
                           const std::vector<int>& zu_indices, const SieveSpec& sieve) {
    sieve.validate();
    const RankPairs rp(t);
    return rp.eval(zq_index(t, rp, b, b_z, zu_indices, sieve));
}

// ---- DQ: demographic heterogeneity ---------------------------------------

// beta_a = b_bar + B_d d_a^x, gamma_a = m_bar + M_d d_a^z; the sieve basis is
// evaluated at per-consumer costs exp(z' gamma_a) with the spec's frozen
// standardization. Demographics are passed per table row.
inline double dq_objective(const PairOutcomeTable& t, const std::vector<VecD>& dem_x_rows,
                           const std::vector<VecD>& dem_z_rows, const VecD& b_bar,
                           const VecD& b_dem, const VecD& m_bar, const VecD& m_dem,
                           const SieveSpec& sieve) {
    sieve.validate();
    const int qx = t.q_x, qz = t.q_z;
    if (dem_x_rows.size() != t.rows() || dem_z_rows.size() != t.rows())
        throw ConfigError("demographics must align with table rows");
    const int qdx = dem_x_rows.empty() ? 0 : static_cast<int>(dem_x_rows.front().size());
    const int qdz = dem_z_rows.empty() ? 0 : static_cast<int>(dem_z_rows.front().size());
    if (static_cast<int>(b_dem.size()) != qx * qdx) throw ConfigError("b_dem dimension mismatch");
    if (static_cast<int>(m_dem.size()) != qz * qdz) throw ConfigError("m_dem dimension mismatch");

    const RankPairs rp(t);
    VecD h(t.rows());
    for (std::size_t p = 0; p < t.rows(); ++p) {
        const std::size_t r = rp.row_order()[p];
        VecD beta = b_bar, gamma = m_bar;
        for (int k = 0; k < qx; ++k)
            for (int d = 0; d < qdx; ++d) beta[k] += b_dem[k * qdx + d] * dem_x_rows[r][d];
        for (int k = 0; k < qz; ++k)
            for (int d = 0; d < qdz; ++d) gamma[k] += m_dem[k * qdz + d] * dem_z_rows[r][d];
        double xb = 0.0;
        for (int k = 0; k < qx; ++k) xb += (t.xi_at(r)[k] - t.xj_at(r)[k]) * beta[k];
        const double ci = std::exp(dot(t.zi_at(r), gamma.data(), qz));
        const double cj = std::exp(dot(t.zj_at(r), gamma.data(), qz));
        h[p] = sieve.ginv_i(ci) - sieve.ginv_j(cj) + xb;
    }
    return rp.eval(h);
}

// ---- XQ: consumer-invariant characteristics (two-step) -------------------

// One row per (consumer, product pair) with the designated endogenous
// components split out for matching.
struct XqRow {
    int consumer = 0;
    int s = 1;
    VecD x_i, x_j;
    VecD z_i, z_j;
    VecD xbar_i, xbar_j;
    VecD endog_i, endog_j;
};

struct XqTable {
    int q_x = 0, q_z = 0, q_xbar = 0, q_e = 0;
    std::vector<XqRow> rows;
};

struct XqDiagnostics {
    std::size_t matched_pairs = 0;
    std::size_t consumers = 0;
};

// Within-consumer objective: consumers contribute the average over their
// matched product pairs of S * 1{h + dxbar'b > 0} + (1-S) * 1{h + ... < 0},
// summed across consumers. Exact matching compares the endogenous
// components bitwise; kernel mode weights by K(||diff|| / bandwidth).
inline double xq_objective(const XqTable& data, const VecD& b_xbar, const VecD& b_hat,
                           const SieveSpec& sieve_hat, bool kernel_match = false,
                           double match_bandwidth = 0.0, XqDiagnostics* diag = nullptr) {
    sieve_hat.validate();
    if (static_cast<int>(b_xbar.size()) != data.q_xbar)
        throw ConfigError("b_xbar dimension mismatch");
    if (kernel_match && !(match_bandwidth > 0.0))
        throw ConfigError("kernel matching needs a positive bandwidth");
    if (sieve_hat.m.empty()) throw ConfigError("first-stage sieve must carry m");

    double total = 0.0;
    std::size_t matched = 0, consumers = 0;
    std::size_t row = 0;
    while (row < data.rows.size()) {
        const int consumer = data.rows[row].consumer;
        std::size_t end = row;
        while (end < data.rows.size() && data.rows[end].consumer == consumer) ++end;
        double acc = 0.0;
        for (std::size_t r = row; r < end; ++r) {
            const XqRow& x = data.rows[r];
            double w;
            if (kernel_match) {
                double d2 = 0.0;
                for (int k = 0; k < data.q_e; ++k)
                    d2 += (x.endog_i[k] - x.endog_j[k]) * (x.endog_i[k] - x.endog_j[k]);
                w = match_kernel(std::sqrt(d2) / match_bandwidth);
            } else {
                w = 1.0;
                for (int k = 0; k < data.q_e; ++k)
                    if (x.endog_i[k] != x.endog_j[k]) {
                        w = 0.0;
                        break;
                    }
            }
            if (w == 0.0) continue;
            ++matched;
            double xb = 0.0;
            for (int k = 0; k < data.q_x; ++k) xb += (x.x_i[k] - x.x_j[k]) * b_hat[k];
            const double ci = std::exp(dot(x.z_i.data(), sieve_hat.m.data(), data.q_z));
            const double cj = std::exp(dot(x.z_j.data(), sieve_hat.m.data(), data.q_z));
            double h = sieve_hat.ginv_i(ci) - sieve_hat.ginv_j(cj) + xb;
            for (int k = 0; k < data.q_xbar; ++k) h += (x.xbar_i[k] - x.xbar_j[k]) * b_xbar[k];
            acc += w * (x.s == 1 ? (h > 0.0 ? 1.0 : 0.0) : (h < 0.0 ? 1.0 : 0.0));
        }
        total += acc / static_cast<double>(end - row);
        ++consumers;
        row = end;
    }
    if (diag) {
        diag->matched_pairs = matched;
        diag->consumers = consumers;
    }
    return total;
}

// J_a from consideration sets: every (searched, unsearched) combination.
inline XqTable build_xq_table(const std::vector<SearchRecord>& records, const Market& m,
                              const std::vector<int>& endog_x_cols,
                              const std::vector<int>& endog_z_cols,
                              std::size_t max_pairs_per_consumer = 64) {
    XqTable out;
    out.q_x = m.config.q_x;
    out.q_z = m.config.q_z;
    out.q_xbar = m.config.q_xbar;
    out.q_e = static_cast<int>(endog_x_cols.size() + endog_z_cols.size());
    if (out.q_xbar == 0) throw DataError("market has no consumer-invariant characteristics");
    for (const auto& rec : records) {
        if (rec.searched.empty()) continue;
        std::vector<char> searched(m.J, 0);
        for (int j : rec.searched) searched[j] = 1;
        std::size_t emitted = 0;
        for (int i : rec.searched) {
            for (int j = 1; j < m.J && emitted < max_pairs_per_consumer; ++j) {
                if (searched[j]) continue;
                XqRow r;
                r.consumer = rec.consumer;
                r.s = 1;  // searched product has the higher reservation value
                r.x_i.assign(m.x_at(rec.consumer, i), m.x_at(rec.consumer, i) + out.q_x);
                r.x_j.assign(m.x_at(rec.consumer, j), m.x_at(rec.consumer, j) + out.q_x);
                r.z_i.assign(m.z_at(rec.consumer, i), m.z_at(rec.consumer, i) + out.q_z);
                r.z_j.assign(m.z_at(rec.consumer, j), m.z_at(rec.consumer, j) + out.q_z);
                r.xbar_i.assign(m.xbar_at(i), m.xbar_at(i) + out.q_xbar);
                r.xbar_j.assign(m.xbar_at(j), m.xbar_at(j) + out.q_xbar);
                for (int k : endog_x_cols) {
                    r.endog_i.push_back(r.x_i[k]);
                    r.endog_j.push_back(r.x_j[k]);
                }
                for (int k : endog_z_cols) {
                    r.endog_i.push_back(r.z_i[k]);
                    r.endog_j.push_back(r.z_j[k]);
                }
                out.rows.push_back(std::move(r));
                ++emitted;
            }
        }
    }
    return out;
}

// ---- joint estimators for the extension objectives -----------------------

// Scale-free engine shared by the ZQ and DQ estimators; mirrors the sieve
// engine but allows utility-side z columns and demographic interactions.
struct ExtendedEstimateConfig {
    std::vector<int> zu_indices;  // ZQ columns (empty for DQ)
    int q_dx = 0, q_dz = 0;       // demographic dims (zero for ZQ)
    int degree = 3;
    int pin_index_b = 0;
    double pin_value_b = -1.0;
    int pin_index_m = -1;
    double pin_value_m = 1.0;
    int restarts = 10;
    std::size_t pair_cap = 2000000;
    int min_obs = 50;
    double param_bandwidth = 0.0;
    std::uint64_t seed = 1;
    NelderMeadOptions nm{400, 1e-11, 1e-7, 0.4};

    nlohmann::json to_json_obj() const {
        return nlohmann::json{{"spec_version", kSpecVersion},
                              {"zu_indices", zu_indices},
                              {"q_dx", q_dx},
                              {"q_dz", q_dz},
                              {"degree", degree},
                              {"pin_index_b", pin_index_b},
                              {"pin_value_b", pin_value_b},
                              {"pin_index_m", pin_index_m},
                              {"pin_value_m", pin_value_m},
                              {"restarts", restarts},
                              {"pair_cap", pair_cap},
                              {"min_obs", min_obs},
                              {"seed", seed}};
    }
};

inline EstimateReport estimate_extended(const std::vector<PairOutcomeTable>& tables,
                                        const std::vector<std::vector<VecD>>& dem_x,
                                        const std::vector<std::vector<VecD>>& dem_z,
                                        const ExtendedEstimateConfig& cfg,
                                        const std::string& method, SieveSpec* fitted_out = nullptr) {
    if (tables.empty()) throw DataError("estimate_extended: no tables");
    const int qx = tables.front().q_x;
    const int qz = tables.front().q_z;
    const int n_zu = static_cast<int>(cfg.zu_indices.size());
    std::size_t total_rows = 0;
    for (const auto& t : tables) total_rows += t.rows();
    if (total_rows < static_cast<std::size_t>(cfg.min_obs))
        throw DataError("estimate_extended: insufficient rows");

    std::vector<RankPairs> rank;
    for (std::size_t t = 0; t < tables.size(); ++t)
        rank.emplace_back(tables[t], cfg.pair_cap, cfg.seed + t);
    std::size_t pairs = 0;
    for (const auto& rp : rank) pairs += rp.pairs_used();
    const double bw =
        cfg.param_bandwidth > 0.0 ? cfg.param_bandwidth : default_bandwidth(pairs);

    // theta layout: b_free | b_z | m((pin)) | m_dem | b_dem | a_1..a_degree
    const int m_dim = cfg.pin_index_m >= 0 ? qz - 1 : qz;
    const int dim = (qx - 1) + n_zu + m_dim + qz * cfg.q_dz + qx * cfg.q_dx + cfg.degree;

    struct Un {
        VecD b, b_z, m, m_dem, b_dem, a;
    };
    auto unpack = [&](const VecD& th) {
        Un u;
        u.b.assign(qx, 0.0);
        u.m.assign(qz, 0.0);
        int p = 0;
        for (int k = 0; k < qx; ++k) u.b[k] = (k == cfg.pin_index_b) ? cfg.pin_value_b : th[p++];
        u.b_z.assign(th.begin() + p, th.begin() + p + n_zu);
        p += n_zu;
        for (int k = 0; k < qz; ++k)
            u.m[k] = (k == cfg.pin_index_m) ? cfg.pin_value_m : th[p++];
        u.m_dem.assign(th.begin() + p, th.begin() + p + qz * cfg.q_dz);
        p += qz * cfg.q_dz;
        u.b_dem.assign(th.begin() + p, th.begin() + p + qx * cfg.q_dx);
        p += qx * cfg.q_dx;
        u.a.assign(th.begin() + p, th.begin() + p + cfg.degree);
        return u;
    };

    auto value = [&](const Un& u, bool smooth) {
        // pooled log-cost moments under per-row gammas
        double sum = 0.0, sum2 = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < tables.size(); ++t) {
            const auto& tab = tables[t];
            for (std::size_t r = 0; r < tab.rows(); ++r) {
                VecD gamma = u.m;
                for (int k = 0; k < qz; ++k)
                    for (int d = 0; d < cfg.q_dz; ++d)
                        gamma[k] += u.m_dem[k * cfg.q_dz + d] * dem_z[t][r][d];
                const double ti = dot(tab.zi_at(r), gamma.data(), qz);
                const double tj = dot(tab.zj_at(r), gamma.data(), qz);
                sum += ti + tj;
                sum2 += ti * ti + tj * tj;
                count += 2;
            }
        }
        const double mu = sum / count;
        const double sd = std::sqrt(std::max(sum2 / count - mu * mu, 1e-24));

        double acc = 0.0;
        for (std::size_t t = 0; t < tables.size(); ++t) {
            const auto& tab = tables[t];
            const auto& rp = rank[t];
            VecD h(tab.rows());
            for (std::size_t p2 = 0; p2 < tab.rows(); ++p2) {
                const std::size_t r = rp.row_order()[p2];
                VecD beta = u.b, gamma = u.m;
                for (int k = 0; k < qx; ++k)
                    for (int d = 0; d < cfg.q_dx; ++d)
                        beta[k] += u.b_dem[k * cfg.q_dx + d] * dem_x[t][r][d];
                for (int k = 0; k < qz; ++k)
                    for (int d = 0; d < cfg.q_dz; ++d)
                        gamma[k] += u.m_dem[k * cfg.q_dz + d] * dem_z[t][r][d];
                double xb = 0.0;
                for (int k = 0; k < qx; ++k) xb += (tab.xi_at(r)[k] - tab.xj_at(r)[k]) * beta[k];
                for (int k = 0; k < n_zu; ++k)
                    xb += (tab.zi_at(r)[cfg.zu_indices[k]] - tab.zj_at(r)[cfg.zu_indices[k]]) *
                          u.b_z[k];
                const double ti = (dot(tab.zi_at(r), gamma.data(), qz) - mu) / sd;
                const double tj = (dot(tab.zj_at(r), gamma.data(), qz) - mu) / sd;
                double gi = 0.0, gj = 0.0, pi = 1.0, pj = 1.0;
                for (int n = 0; n < cfg.degree; ++n) {
                    pi *= ti;
                    pj *= tj;
                    gi += u.a[n] * pi;
                    gj += u.a[n] * pj;
                }
                h[p2] = gi - gj + xb;
            }
            acc += rp.eval(h, smooth, bw);
        }
        return acc;
    };

    auto neg_surrogate = [&](const VecD& th) {
        const Un u = unpack(th);
        if (norm2(u.m) < 1e-10) return 1e100;
        return -value(u, true);
    };
    auto sharp = [&](const VecD& th) {
        const Un u = unpack(th);
        if (norm2(u.m) < 1e-10) return -1e100;
        return value(u, false);
    };

    Rng rng = Rng::stream(cfg.seed, 0xE27E4u);
    std::vector<VecD> starts;
    {
        VecD s0(dim, 0.0);
        const int a_off = dim - cfg.degree;
        s0[a_off] = -1.0;
        if (cfg.pin_index_m < 0) s0[(qx - 1) + n_zu] = 1.0;
        starts.push_back(s0);
    }
    while (static_cast<int>(starts.size()) < std::max(cfg.restarts, 1))
        starts.push_back(detail::random_direction(rng, dim));

    VecD best_theta;
    double best_val = -1e300, best_start = -1e300;
    std::vector<VecD> sols;
    for (const auto& s : starts) {
        best_start = std::max(best_start, sharp(s));
        const OptResult r = nelder_mead_min(neg_surrogate, s, cfg.nm);
        const double v = sharp(r.x);
        sols.push_back(r.x);
        if (v > best_val) {
            best_val = v;
            best_theta = r.x;
        }
    }
    int agree = 0;
    for (const auto& s : sols) {
        double d = 0.0;
        for (int k = 0; k < dim; ++k) d = std::max(d, std::abs(s[k] - best_theta[k]));
        if (d <= 0.05) ++agree;
    }

    const Un u = unpack(best_theta);
    EstimateReport rep;
    rep.method = method;
    rep.seed = cfg.seed;
    rep.config_hash = fnv1a_hex(cfg.to_json_obj().dump());
    rep.n_rows = total_rows;
    rep.n_pairs = pairs;
    rep.restarts = static_cast<int>(sols.size());
    rep.agree_fraction = sols.empty() ? 0.0 : static_cast<double>(agree) / sols.size();
    rep.objective = best_val;
    rep.improved_over_starts = best_val > best_start + 1e-15;

    const auto xn = tables.front().x_names;
    const auto zn = tables.front().z_names;
    auto xname = [&](int k) {
        return k < static_cast<int>(xn.size()) ? xn[k] : "x" + std::to_string(k);
    };
    auto zname = [&](int k) {
        return k < static_cast<int>(zn.size()) ? zn[k] : "z" + std::to_string(k);
    };
    for (int k = 0; k < qx; ++k) {
        rep.coef_names.push_back("beta_" + xname(k));
        rep.estimates.push_back(u.b[k]);
    }
    for (int k = 0; k < n_zu; ++k) {
        rep.coef_names.push_back("beta_zu_" + zname(cfg.zu_indices[k]));
        rep.estimates.push_back(u.b_z[k]);
    }
    for (int k = 0; k < qz; ++k) {
        rep.coef_names.push_back("gamma_" + zname(k));
        rep.estimates.push_back(u.m[k]);
    }
    for (int k = 0; k < qx * cfg.q_dx; ++k) {
        rep.coef_names.push_back("beta_dem_" + std::to_string(k));
        rep.estimates.push_back(u.b_dem[k]);
    }
    for (int k = 0; k < qz * cfg.q_dz; ++k) {
        rep.coef_names.push_back("gamma_dem_" + std::to_string(k));
        rep.estimates.push_back(u.m_dem[k]);
    }
    rep.raw_estimates = rep.estimates;

    if (fitted_out) {
        SieveSpec spec;
        spec.degree = cfg.degree;
        spec.shared = true;
        spec.m = u.m;
        // anchored moments under the final parameters
        double sum = 0.0, sum2 = 0.0;
        std::size_t count = 0;
        for (std::size_t t = 0; t < tables.size(); ++t)
            for (std::size_t r = 0; r < tables[t].rows(); ++r) {
                VecD gamma = u.m;
                for (int k = 0; k < qz; ++k)
                    for (int d = 0; d < cfg.q_dz; ++d)
                        gamma[k] += u.m_dem[k * cfg.q_dz + d] * dem_z[t][r][d];
                const double ti = dot(tables[t].zi_at(r), gamma.data(), qz);
                const double tj = dot(tables[t].zj_at(r), gamma.data(), qz);
                sum += ti + tj;
                sum2 += ti * ti + tj * tj;
                count += 2;
            }
        spec.log_mean = sum / count;
        spec.log_sd = std::sqrt(std::max(sum2 / count - spec.log_mean * spec.log_mean, 1e-24));
        spec.coeff_i.assign(cfg.degree + 1, 0.0);
        for (int n = 0; n < cfg.degree; ++n) spec.coeff_i[n + 1] = u.a[n];
        spec.cost_lo = std::exp(spec.log_mean - 3.0 * spec.log_sd);
        spec.cost_hi = std::exp(spec.log_mean + 3.0 * spec.log_sd);
        spec.cost_axis = cfg.pin_index_m >= 0 ? "pinned" : "free";
        *fitted_out = spec;
    }
    return rep;
}

struct XqEstimateConfig {
    bool kernel_match = false;
    double match_bandwidth = 0.0;
    int restarts = 6;
    std::uint64_t seed = 1;
    NelderMeadOptions nm{300, 1e-11, 1e-8, 0.4};
};

inline EstimateReport estimate_xq(const XqTable& data, const VecD& b_hat,
                                  const SieveSpec& sieve_hat, const XqEstimateConfig& cfg) {
    if (data.rows.empty()) throw DataError("estimate_xq: empty table");
    const int dim = data.q_xbar;
    auto neg = [&](const VecD& th) {
        return -xq_objective(data, th, b_hat, sieve_hat, cfg.kernel_match, cfg.match_bandwidth);
    };
    Rng rng = Rng::stream(cfg.seed, 0xBA2u);
    VecD best;
    double best_val = -1e300;
    for (int s = 0; s < std::max(cfg.restarts, 1); ++s) {
        VecD start(dim, 0.0);
        if (s > 0)
            for (auto& v : start) v = rng.normal();
        const OptResult r = nelder_mead_min(neg, start, cfg.nm);
        if (-r.f > best_val) {
            best_val = -r.f;
            best = r.x;
        }
    }
    XqDiagnostics diag;
    xq_objective(data, best, b_hat, sieve_hat, cfg.kernel_match, cfg.match_bandwidth, &diag);

    EstimateReport rep;
    rep.method = "xq";
    rep.seed = cfg.seed;
    rep.objective = best_val;
    rep.n_rows = data.rows.size();
    rep.n_pairs = diag.matched_pairs;
    rep.restarts = cfg.restarts;
    for (int k = 0; k < dim; ++k) rep.coef_names.push_back("beta_xbar_" + std::to_string(k));
    rep.estimates = best;
    rep.raw_estimates = best;
    if (diag.matched_pairs == 0)
        rep.notes.push_back("no matched product pairs under the endogenous designation");
    rep.notes.push_back("second stage holds the first-stage estimates fixed");
    return rep;
}

}  // namespace pmrank
