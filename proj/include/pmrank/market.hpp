#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmrank/common.hpp"
#include "pmrank/distributions.hpp"

namespace pmrank {

// Synthetic market configuration. Product 0 is the outside option; inside
// goods are 1..n_products-1. The first x column is the (possibly endogenous)
// price and the first z column is the within-impression position rank.
struct MarketConfig {
    int n_consumers = 1000;
    int n_products = 10;
    int q_x = 2;
    int q_z = 2;
    VecD beta{-1.0, 1.0};
    VecD gamma{0.2, 0.3};
    MatchValueDist match_dist = MatchValueDist::normal(0.0, 3.0);
    std::vector<MatchValueDist> match_dists;  // optional per-product override, indexed by id
    double eta_sd = 0.7071067811865476;  // N(0, 0.5) read as variance 0.5
    double xi_sd = 1.0;

    // endogeneity controls
    double price_xi_loading = 0.6;    // price_base_j = intercept + a*xi_j + b*U_j
    double price_unif_loading = 0.8;  // U_j uniform on (-sqrt3, sqrt3), unit variance
    double price_noise_sd = 0.3;      // impression-level price noise
    double price_intercept = 0.0;
    double position_xi_loading = 0.7;  // position = rank of (loading*xi_j + noise), descending

    // optional consumer-invariant characteristics (utility += xbar_j' beta_xbar)
    int q_xbar = 0;
    VecD beta_xbar;

    // optional demographics: beta_a = beta + Bd * d_a, gamma_a = gamma + Gd * d_a
    int q_dx = 0;
    int q_dz = 0;
    VecD beta_dem;   // q_x * q_dx, row-major
    VecD gamma_dem;  // q_z * q_dz, row-major

    std::uint64_t seed = 1;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;

    void validate() const {
        if (n_products < 2) throw ConfigError("n_products must be >= 2 (outside + one inside)");
        if (n_consumers < 1) throw ConfigError("n_consumers must be positive");
        if (q_x < 1 || q_z < 1) throw ConfigError("q_x and q_z must be >= 1");
        if (static_cast<int>(beta.size()) != q_x) throw ConfigError("beta size != q_x");
        if (static_cast<int>(gamma.size()) != q_z) throw ConfigError("gamma size != q_z");
        if (q_xbar > 0 && static_cast<int>(beta_xbar.size()) != q_xbar)
            throw ConfigError("beta_xbar size != q_xbar");
        if (q_dx > 0 && static_cast<int>(beta_dem.size()) != q_x * q_dx)
            throw ConfigError("beta_dem size != q_x*q_dx");
        if (q_dz > 0 && static_cast<int>(gamma_dem.size()) != q_z * q_dz)
            throw ConfigError("gamma_dem size != q_z*q_dz");
        if (!(eta_sd > 0.0)) throw ConfigError("eta_sd must be positive");
        if (xi_sd < 0.0 || price_noise_sd < 0.0) throw ConfigError("negative sd");
        match_dist.validate();
        if (!match_dists.empty()) {
            if (static_cast<int>(match_dists.size()) != n_products)
                throw ConfigError("match_dists must list one distribution per product");
            for (const auto& d : match_dists) d.validate();
        }
    }

    std::vector<std::string> effective_x_names() const {
        std::vector<std::string> n = x_names;
        if (static_cast<int>(n.size()) != q_x) {
            n.clear();
            n.push_back("price");
            for (int k = 1; k < q_x; ++k) n.push_back("x" + std::to_string(k + 1));
        }
        return n;
    }
    std::vector<std::string> effective_z_names() const {
        std::vector<std::string> n = z_names;
        if (static_cast<int>(n.size()) != q_z) {
            n.clear();
            n.push_back("position");
            for (int k = 1; k < q_z; ++k) n.push_back("z" + std::to_string(k + 1));
        }
        return n;
    }
};

inline void to_json(nlohmann::json& j, const MarketConfig& c) {
    j = nlohmann::json{{"spec_version", kSpecVersion},
                       {"n_consumers", c.n_consumers},
                       {"n_products", c.n_products},
                       {"q_x", c.q_x},
                       {"q_z", c.q_z},
                       {"beta", c.beta},
                       {"gamma", c.gamma},
                       {"match_dist", c.match_dist},
                       {"match_dists", c.match_dists},
                       {"eta_sd", c.eta_sd},
                       {"xi_sd", c.xi_sd},
                       {"price_xi_loading", c.price_xi_loading},
                       {"price_unif_loading", c.price_unif_loading},
                       {"price_noise_sd", c.price_noise_sd},
                       {"price_intercept", c.price_intercept},
                       {"position_xi_loading", c.position_xi_loading},
                       {"q_xbar", c.q_xbar},
                       {"beta_xbar", c.beta_xbar},
                       {"q_dx", c.q_dx},
                       {"q_dz", c.q_dz},
                       {"beta_dem", c.beta_dem},
                       {"gamma_dem", c.gamma_dem},
                       {"seed", c.seed},
                       {"x_names", c.effective_x_names()},
                       {"z_names", c.effective_z_names()}};
}

template <typename T>
T require_field(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing config field: " + key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad config field '" + key + "': " + e.what());
    }
}

inline void from_json(const nlohmann::json& j, MarketConfig& c) {
    c = MarketConfig{};
    c.n_consumers = require_field<int>(j, "n_consumers");
    c.n_products = require_field<int>(j, "n_products");
    c.q_x = j.value("q_x", 2);
    c.q_z = j.value("q_z", 2);
    c.beta = require_field<VecD>(j, "beta");
    c.gamma = require_field<VecD>(j, "gamma");
    if (j.contains("match_dist")) c.match_dist = j.at("match_dist").get<MatchValueDist>();
    if (j.contains("match_dists"))
        c.match_dists = j.at("match_dists").get<std::vector<MatchValueDist>>();
    c.eta_sd = j.value("eta_sd", c.eta_sd);
    c.xi_sd = j.value("xi_sd", c.xi_sd);
    c.price_xi_loading = j.value("price_xi_loading", c.price_xi_loading);
    c.price_unif_loading = j.value("price_unif_loading", c.price_unif_loading);
    c.price_noise_sd = j.value("price_noise_sd", c.price_noise_sd);
    c.price_intercept = j.value("price_intercept", c.price_intercept);
    c.position_xi_loading = j.value("position_xi_loading", c.position_xi_loading);
    c.q_xbar = j.value("q_xbar", 0);
    c.beta_xbar = j.value("beta_xbar", VecD{});
    c.q_dx = j.value("q_dx", 0);
    c.q_dz = j.value("q_dz", 0);
    c.beta_dem = j.value("beta_dem", VecD{});
    c.gamma_dem = j.value("gamma_dem", VecD{});
    c.seed = j.value("seed", std::uint64_t{1});
    c.x_names = j.value("x_names", std::vector<std::string>{});
    c.z_names = j.value("z_names", std::vector<std::string>{});
    c.validate();
}

// Realized market. Row-major (consumer, product, component) layout; product
// 0 is the outside option with zeroed covariates. xi is identical across
// consumers for a product, eta/eps are iid across consumers and products.
struct Market {
    MarketConfig config;
    int n = 0;
    int J = 0;
    VecD xi;      // J
    VecD xbar;    // J * q_xbar
    VecD x;       // n * J * q_x
    VecD z;       // n * J * q_z
    VecD eta;     // n * J
    VecD eps;     // n * J
    VecD nu;      // n
    VecD dem_x;   // n * q_dx
    VecD dem_z;   // n * q_dz

    const double* x_at(int a, int j) const { return &x[(static_cast<std::size_t>(a) * J + j) * config.q_x]; }
    const double* z_at(int a, int j) const { return &z[(static_cast<std::size_t>(a) * J + j) * config.q_z]; }
    double eta_at(int a, int j) const { return eta[static_cast<std::size_t>(a) * J + j]; }
    double eps_at(int a, int j) const { return eps[static_cast<std::size_t>(a) * J + j]; }
    const double* xbar_at(int j) const { return &xbar[static_cast<std::size_t>(j) * config.q_xbar]; }
    const double* dem_x_at(int a) const { return &dem_x[static_cast<std::size_t>(a) * config.q_dx]; }
    const double* dem_z_at(int a) const { return &dem_z[static_cast<std::size_t>(a) * config.q_dz]; }

    VecD beta_for(int a) const {
        VecD b = config.beta;
        for (int k = 0; k < config.q_x; ++k)
            for (int d = 0; d < config.q_dx; ++d)
                b[k] += config.beta_dem[k * config.q_dx + d] * dem_x_at(a)[d];
        return b;
    }
    VecD gamma_for(int a) const {
        VecD g = config.gamma;
        for (int k = 0; k < config.q_z; ++k)
            for (int d = 0; d < config.q_dz; ++d)
                g[k] += config.gamma_dem[k * config.q_dz + d] * dem_z_at(a)[d];
        return g;
    }
};

// Per-consumer search outcome under the optimal strategy.
struct SearchRecord {
    int consumer = 0;
    std::vector<int> searched;   // product ids in search order
    VecD realized_utilities;     // aligned with searched
    int purchase = 0;            // product id, 0 = outside option
    bool reservation_tie = false;
};

// Observed outcome rows for one product pair. Rows are sorted by consumer id
// and contain exactly the consumers who searched at least one of the pair.
struct PairOutcomeTable {
    int product_i = 0;
    int product_j = 0;
    int q_x = 0;
    int q_z = 0;
    std::vector<int> consumer;
    std::vector<signed char> s;  // S in {0,1}
    VecD x_i, x_j;               // rows * q_x
    VecD z_i, z_j;               // rows * q_z
    std::vector<std::string> x_names, z_names;

    std::size_t rows() const { return consumer.size(); }
    const double* xi_at(std::size_t r) const { return &x_i[r * q_x]; }
    const double* xj_at(std::size_t r) const { return &x_j[r * q_x]; }
    const double* zi_at(std::size_t r) const { return &z_i[r * q_z]; }
    const double* zj_at(std::size_t r) const { return &z_j[r * q_z]; }

    void push_row(int a, int s_val, const double* xi_p, const double* xj_p, const double* zi_p,
                  const double* zj_p) {
        consumer.push_back(a);
        s.push_back(static_cast<signed char>(s_val));
        x_i.insert(x_i.end(), xi_p, xi_p + q_x);
        x_j.insert(x_j.end(), xj_p, xj_p + q_x);
        z_i.insert(z_i.end(), zi_p, zi_p + q_z);
        z_j.insert(z_j.end(), zj_p, zj_p + q_z);
    }

    PairOutcomeTable subset(const std::vector<int>& sorted_consumer_ids) const {
        PairOutcomeTable out;
        out.product_i = product_i;
        out.product_j = product_j;
        out.q_x = q_x;
        out.q_z = q_z;
        out.x_names = x_names;
        out.z_names = z_names;
        std::size_t p = 0;
        for (std::size_t r = 0; r < rows(); ++r) {
            while (p < sorted_consumer_ids.size() && sorted_consumer_ids[p] < consumer[r]) ++p;
            if (p < sorted_consumer_ids.size() && sorted_consumer_ids[p] == consumer[r])
                out.push_row(consumer[r], s[r], xi_at(r), xj_at(r), zi_at(r), zj_at(r));
        }
        return out;
    }
};

}  // namespace pmrank
