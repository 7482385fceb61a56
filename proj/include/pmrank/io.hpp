#pragma once

#include <filesystem>

#include "pmrank/csv.hpp"
#include "pmrank/market.hpp"

namespace pmrank {

// Simulated-market directory layout: market.csv (one row per consumer x
// inside product, observed covariates plus unobserved components prefixed
// unobs_), clicks.csv, purchases.csv and a manifest.
inline void write_market_dir(const std::string& dir, const Market& m,
                             const std::vector<SearchRecord>& records) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& cfg = m.config;
    const auto xn = cfg.effective_x_names();
    const auto zn = cfg.effective_z_names();

    std::string market;
    market += "consumer,product";
    for (const auto& n : xn) market += "," + n;
    for (const auto& n : zn) market += "," + n;
    for (int k = 0; k < cfg.q_xbar; ++k) market += ",xbar_" + std::to_string(k);
    for (int k = 0; k < cfg.q_dx; ++k) market += ",dem_x_" + std::to_string(k);
    for (int k = 0; k < cfg.q_dz; ++k) market += ",dem_z_" + std::to_string(k);
    market += ",unobs_xi,unobs_eta,unobs_eps,unobs_nu\n";
    for (int a = 0; a < m.n; ++a)
        for (int j = 1; j < m.J; ++j) {
            market += std::to_string(a) + "," + std::to_string(j);
            for (int k = 0; k < cfg.q_x; ++k) market += "," + format_double(m.x_at(a, j)[k]);
            for (int k = 0; k < cfg.q_z; ++k) market += "," + format_double(m.z_at(a, j)[k]);
            for (int k = 0; k < cfg.q_xbar; ++k) market += "," + format_double(m.xbar_at(j)[k]);
            for (int k = 0; k < cfg.q_dx; ++k) market += "," + format_double(m.dem_x_at(a)[k]);
            for (int k = 0; k < cfg.q_dz; ++k) market += "," + format_double(m.dem_z_at(a)[k]);
            market += "," + format_double(m.xi[j]) + "," + format_double(m.eta_at(a, j)) + "," +
                      format_double(m.eps_at(a, j)) + "," + format_double(m.nu[a]) + "\n";
        }
    write_text_file(dir + "/market.csv", market);

    std::string clicks = "consumer,step,product,realized_utility\n";
    std::string purchases = "consumer,product\n";
    for (const auto& rec : records) {
        for (std::size_t k = 0; k < rec.searched.size(); ++k)
            clicks += std::to_string(rec.consumer) + "," + std::to_string(k) + "," +
                      std::to_string(rec.searched[k]) + "," +
                      format_double(rec.realized_utilities[k]) + "\n";
        purchases += std::to_string(rec.consumer) + "," + std::to_string(rec.purchase) + "\n";
    }
    write_text_file(dir + "/clicks.csv", clicks);
    write_text_file(dir + "/purchases.csv", purchases);

    nlohmann::json manifest{
        {"spec_version", kSpecVersion},
        {"type", "simulated_market"},
        {"config", cfg},
        {"files", {{"market", "market.csv"}, {"clicks", "clicks.csv"}, {"purchases", "purchases.csv"}}},
        {"notes",
         {"exogenous covariate columns are iid standard normal by default",
          "eta variance reads N(0,0.5) as variance 0.5; eta_sd holds the sd"}}};
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

struct LoadedMarket {
    Market market;
    std::vector<SearchRecord> records;
    nlohmann::json manifest;
};

inline LoadedMarket read_market_dir(const std::string& dir) {
    LoadedMarket out;
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad manifest.json: " + std::string(e.what()));
    }
    if (manifest.value("type", "") != "simulated_market")
        throw DataError("manifest type is not simulated_market");
    out.manifest = manifest;
    const MarketConfig cfg = manifest.at("config").get<MarketConfig>();

    Market& m = out.market;
    m.config = cfg;
    m.n = cfg.n_consumers;
    m.J = cfg.n_products;
    m.xi.assign(m.J, 0.0);
    m.x.assign(static_cast<std::size_t>(m.n) * m.J * cfg.q_x, 0.0);
    m.z.assign(static_cast<std::size_t>(m.n) * m.J * cfg.q_z, 0.0);
    m.eta.assign(static_cast<std::size_t>(m.n) * m.J, 0.0);
    m.eps.assign(static_cast<std::size_t>(m.n) * m.J, 0.0);
    m.nu.assign(m.n, 0.0);
    m.xbar.assign(static_cast<std::size_t>(m.J) * cfg.q_xbar, 0.0);
    m.dem_x.assign(static_cast<std::size_t>(m.n) * cfg.q_dx, 0.0);
    m.dem_z.assign(static_cast<std::size_t>(m.n) * cfg.q_dz, 0.0);

    const CsvTable t = read_csv(dir + "/market.csv");
    if (!t.bad_rows.empty())
        throw DataError("market.csv has malformed rows, first at line " +
                        std::to_string(t.bad_rows.front().first));
    const int base = 2;
    for (const auto& row : t.rows) {
        const int a = static_cast<int>(parse_double_field(row[0], "consumer"));
        const int j = static_cast<int>(parse_double_field(row[1], "product"));
        if (a < 0 || a >= m.n || j < 1 || j >= m.J) throw DataError("market.csv id out of range");
        int c = base;
        for (int k = 0; k < cfg.q_x; ++k)
            m.x[(static_cast<std::size_t>(a) * m.J + j) * cfg.q_x + k] =
                parse_double_field(row[c++], "x");
        for (int k = 0; k < cfg.q_z; ++k)
            m.z[(static_cast<std::size_t>(a) * m.J + j) * cfg.q_z + k] =
                parse_double_field(row[c++], "z");
        for (int k = 0; k < cfg.q_xbar; ++k)
            m.xbar[static_cast<std::size_t>(j) * cfg.q_xbar + k] =
                parse_double_field(row[c++], "xbar");
        for (int k = 0; k < cfg.q_dx; ++k)
            m.dem_x[static_cast<std::size_t>(a) * cfg.q_dx + k] =
                parse_double_field(row[c++], "dem_x");
        for (int k = 0; k < cfg.q_dz; ++k)
            m.dem_z[static_cast<std::size_t>(a) * cfg.q_dz + k] =
                parse_double_field(row[c++], "dem_z");
        m.xi[j] = parse_double_field(row[c++], "xi");
        m.eta[static_cast<std::size_t>(a) * m.J + j] = parse_double_field(row[c++], "eta");
        m.eps[static_cast<std::size_t>(a) * m.J + j] = parse_double_field(row[c++], "eps");
        m.nu[a] = parse_double_field(row[c++], "nu");
    }

    std::vector<SearchRecord> recs(m.n);
    for (int a = 0; a < m.n; ++a) recs[a].consumer = a;
    const CsvTable clicks = read_csv(dir + "/clicks.csv");
    for (const auto& row : clicks.rows) {
        const int a = static_cast<int>(parse_double_field(row[0], "consumer"));
        const int step = static_cast<int>(parse_double_field(row[1], "step"));
        const int j = static_cast<int>(parse_double_field(row[2], "product"));
        const double u = parse_double_field(row[3], "utility");
        auto& r = recs.at(a);
        if (static_cast<int>(r.searched.size()) != step)
            throw DataError("clicks.csv steps out of order for consumer " + std::to_string(a));
        r.searched.push_back(j);
        r.realized_utilities.push_back(u);
    }
    const CsvTable purchases = read_csv(dir + "/purchases.csv");
    for (const auto& row : purchases.rows) {
        const int a = static_cast<int>(parse_double_field(row[0], "consumer"));
        recs.at(a).purchase = static_cast<int>(parse_double_field(row[1], "product"));
    }
    out.records = std::move(recs);
    return out;
}

}  // namespace pmrank
