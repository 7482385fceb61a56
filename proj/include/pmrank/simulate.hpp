#pragma once

#include <algorithm>
#include <numeric>

#include "pmrank/marginal_benefit.hpp"
#include "pmrank/market.hpp"
#include "pmrank/parallel.hpp"
#include "pmrank/rng.hpp"

namespace pmrank {

inline Market generate_market(const MarketConfig& config) {
    config.validate();
    Market m;
    m.config = config;
    m.n = config.n_consumers;
    m.J = config.n_products;
    const int J = m.J, qx = config.q_x, qz = config.q_z;

    m.xi.assign(J, 0.0);
    m.xbar.assign(static_cast<std::size_t>(J) * std::max(config.q_xbar, 1), 0.0);
    if (config.q_xbar == 0) m.xbar.clear();
    m.x.assign(static_cast<std::size_t>(m.n) * J * qx, 0.0);
    m.z.assign(static_cast<std::size_t>(m.n) * J * qz, 0.0);
    m.eta.assign(static_cast<std::size_t>(m.n) * J, 0.0);
    m.eps.assign(static_cast<std::size_t>(m.n) * J, 0.0);
    m.nu.assign(m.n, 0.0);
    m.dem_x.assign(static_cast<std::size_t>(m.n) * std::max(config.q_dx, 1), 0.0);
    if (config.q_dx == 0) m.dem_x.clear();
    m.dem_z.assign(static_cast<std::size_t>(m.n) * std::max(config.q_dz, 1), 0.0);
    if (config.q_dz == 0) m.dem_z.clear();

    // product-level draws: quality, the product component of price, xbar
    VecD price_base(J, 0.0);
    {
        Rng rng = Rng::stream(config.seed, 0xF00Du);
        const double sqrt3 = 1.7320508075688772;
        for (int j = 1; j < J; ++j) {
            m.xi[j] = config.xi_sd * rng.normal();
            const double u = rng.uniform(-sqrt3, sqrt3);
            price_base[j] = config.price_intercept + config.price_xi_loading * m.xi[j] +
                            config.price_unif_loading * u;
            for (int k = 0; k < config.q_xbar; ++k)
                m.xbar[static_cast<std::size_t>(j) * config.q_xbar + k] = rng.normal();
        }
    }

    // consumer-level draws on independent streams keyed by (seed, consumer)
    parallel_for(m.n, [&](int a) {
        Rng rng = Rng::stream(config.seed, 0xC0115u, static_cast<std::uint64_t>(a));
        m.nu[a] = rng.normal();
        for (int d = 0; d < config.q_dx; ++d) m.dem_x[static_cast<std::size_t>(a) * config.q_dx + d] = rng.normal();
        for (int d = 0; d < config.q_dz; ++d) m.dem_z[static_cast<std::size_t>(a) * config.q_dz + d] = rng.normal();

        VecD score(J, 0.0);
        for (int j = 1; j < J; ++j) {
            double* xr = &m.x[(static_cast<std::size_t>(a) * J + j) * qx];
            xr[0] = price_base[j] + config.price_noise_sd * rng.normal();
            for (int k = 1; k < qx; ++k) xr[k] = rng.normal();
            score[j] = config.position_xi_loading * m.xi[j] + rng.normal();
            double* zr = &m.z[(static_cast<std::size_t>(a) * J + j) * qz];
            for (int k = 1; k < qz; ++k) zr[k] = rng.normal();
            m.eta[static_cast<std::size_t>(a) * J + j] = config.eta_sd * rng.normal();
            const MatchValueDist& f =
                config.match_dists.empty() ? config.match_dist : config.match_dists[j];
            m.eps[static_cast<std::size_t>(a) * J + j] = f.sample(rng);
        }
        // position: descending rank of the quality score within the impression
        std::vector<int> order(J - 1);
        std::iota(order.begin(), order.end(), 1);
        std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
            if (score[lhs] != score[rhs]) return score[lhs] > score[rhs];
            return lhs < rhs;
        });
        for (int rank = 0; rank < J - 1; ++rank) {
            const int j = order[rank];
            m.z[(static_cast<std::size_t>(a) * J + j) * qz] = static_cast<double>(rank + 1);
        }
    });
    return m;
}

// The three Weitzman rules on precomputed reservation utilities. r and the
// realized-utility callback are indexed by product id; ids lists the inside
// goods. Free recall: the purchase is the argmax realized utility.
template <typename RealizedFn>
SearchRecord run_weitzman(const std::vector<int>& ids, const VecD& r, double outside_utility,
                          RealizedFn&& realized, int consumer_id) {
    SearchRecord rec;
    rec.consumer = consumer_id;
    std::vector<int> order = ids;
    std::sort(order.begin(), order.end(), [&](int lhs, int rhs) {
        if (r[lhs] != r[rhs]) return r[lhs] > r[rhs];
        return lhs < rhs;  // measure-zero tie, resolved by product id
    });
    for (std::size_t k = 0; k + 1 < order.size(); ++k)
        if (r[order[k]] == r[order[k + 1]]) rec.reservation_tie = true;

    double best = outside_utility;
    int best_id = 0;
    for (int j : order) {
        if (best >= r[j]) break;  // stopping rule
        const double u = realized(j);
        rec.searched.push_back(j);
        rec.realized_utilities.push_back(u);
        if (u > best) {
            best = u;
            best_id = j;
        }
    }
    rec.purchase = best_id;
    return rec;
}

// Reservation utilities for every inside good of one consumer, eq. r = G^-1(c) + delta.
inline VecD reservation_utilities(const Market& m, int a,
                                  const std::vector<CachedGinv>& ginv_by_product) {
    const auto& cfg = m.config;
    const VecD beta = m.beta_for(a);
    const VecD gamma = m.gamma_for(a);
    VecD r(m.J, 0.0);
    for (int j = 1; j < m.J; ++j) {
        const double cost = std::exp(dot(m.z_at(a, j), gamma.data(), cfg.q_z));
        const double delta =
            dot(m.x_at(a, j), beta.data(), cfg.q_x) + m.xi[j] + m.nu[a] + m.eta_at(a, j) +
            (cfg.q_xbar > 0 ? dot(m.xbar_at(j), cfg.beta_xbar.data(), cfg.q_xbar) : 0.0);
        const auto& g = ginv_by_product.size() == 1 ? ginv_by_product[0] : ginv_by_product[j];
        r[j] = g(cost) + delta;
    }
    return r;
}

inline std::vector<CachedGinv> build_ginv_caches(const Market& m) {
    const auto& cfg = m.config;
    // cost range over the realized data, with headroom for the cache
    double lo = 1e300, hi = -1e300;
    for (int a = 0; a < m.n; ++a) {
        const VecD gamma = m.gamma_for(a);
        for (int j = 1; j < m.J; ++j) {
            const double t = dot(m.z_at(a, j), gamma.data(), cfg.q_z);
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    const double c_lo = std::exp(lo - 0.5);
    const double c_hi = std::exp(hi + 0.5);
    std::vector<CachedGinv> out;
    if (cfg.match_dists.empty()) {
        out.emplace_back(cfg.match_dist, c_lo, c_hi, 1024);
    } else {
        out.resize(cfg.n_products);
        for (int j = 0; j < cfg.n_products; ++j) out[j] = CachedGinv(cfg.match_dists[std::max(j, 1)], c_lo, c_hi, 1024);
    }
    return out;
}

inline SearchRecord weitzman_search(const Market& m, int a,
                                    const std::vector<CachedGinv>& ginv_by_product) {
    const auto& cfg = m.config;
    const VecD beta = m.beta_for(a);
    const VecD r = reservation_utilities(m, a, ginv_by_product);
    std::vector<int> ids(m.J - 1);
    std::iota(ids.begin(), ids.end(), 1);
    auto realized = [&](int j) {
        const double delta =
            dot(m.x_at(a, j), beta.data(), cfg.q_x) + m.xi[j] + m.nu[a] + m.eta_at(a, j) +
            (cfg.q_xbar > 0 ? dot(m.xbar_at(j), cfg.beta_xbar.data(), cfg.q_xbar) : 0.0);
        return delta + m.eps_at(a, j);
    };
    return run_weitzman(ids, r, m.nu[a], realized, a);
}

inline std::vector<SearchRecord> simulate_searches(const Market& m) {
    const auto ginv = build_ginv_caches(m);
    std::vector<SearchRecord> records(m.n);
    parallel_for(m.n, [&](int a) { records[a] = weitzman_search(m, a, ginv); });
    return records;
}

// Observed outcome construction for a product pair: consumers searching at
// least one of {i, j}; S = 1 when i precedes j (or j unsearched).
inline PairOutcomeTable construct_outcomes(const std::vector<SearchRecord>& records,
                                           const Market& m, int i, int j) {
    if (i == 0 || j == 0) throw ConfigError("outcome pair cannot include the outside option");
    if (i == j || i >= m.J || j >= m.J || i < 1 || j < 1)
        throw ConfigError("invalid product pair");
    PairOutcomeTable t;
    t.product_i = i;
    t.product_j = j;
    t.q_x = m.config.q_x;
    t.q_z = m.config.q_z;
    t.x_names = m.config.effective_x_names();
    t.z_names = m.config.effective_z_names();
    for (const auto& rec : records) {
        int pos_i = -1, pos_j = -1;
        for (std::size_t k = 0; k < rec.searched.size(); ++k) {
            if (rec.searched[k] == i) pos_i = static_cast<int>(k);
            if (rec.searched[k] == j) pos_j = static_cast<int>(k);
        }
        if (pos_i < 0 && pos_j < 0) continue;
        int s;
        if (pos_i >= 0 && pos_j >= 0)
            s = pos_i < pos_j ? 1 : 0;
        else
            s = pos_i >= 0 ? 1 : 0;
        const int a = rec.consumer;
        t.push_row(a, s, m.x_at(a, i), m.x_at(a, j), m.z_at(a, i), m.z_at(a, j));
    }
    return t;
}

inline std::pair<int, int> most_searched_pair(const std::vector<SearchRecord>& records, int J) {
    std::vector<std::pair<int, int>> counts(J, {0, 0});  // (count, -id) sortable
    for (int j = 0; j < J; ++j) counts[j] = {0, j};
    for (const auto& rec : records)
        for (int j : rec.searched) counts[j].first++;
    std::sort(counts.begin() + 1, counts.end(), [](const auto& lhs, const auto& rhs) {
        if (lhs.first != rhs.first) return lhs.first > rhs.first;
        return lhs.second < rhs.second;
    });
    if (J < 3) throw DataError("need at least two inside goods");
    return {counts[1].second, counts[2].second};
}

}  // namespace pmrank
