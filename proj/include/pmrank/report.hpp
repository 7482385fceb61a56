#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pmrank/common.hpp"

namespace pmrank {

struct EstimateReport {
    std::string method;
    std::vector<std::string> coef_names;
    VecD estimates;      // model-scale (normalized where the method normalizes)
    VecD raw_estimates;  // pre-normalization values when they differ (likelihood)
    double objective = 0.0;
    std::size_t n_rows = 0;
    std::size_t n_pairs = 0;
    int restarts = 0;
    double agree_fraction = 1.0;
    bool improved_over_starts = true;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::string> notes;
    nlohmann::json extra = nlohmann::json::object();

    double coef(const std::string& name) const {
        for (std::size_t k = 0; k < coef_names.size(); ++k)
            if (coef_names[k] == name) return estimates[k];
        throw DataError("no coefficient named " + name);
    }
};

inline void to_json(nlohmann::json& j, const EstimateReport& r) {
    j = nlohmann::json{{"spec_version", kSpecVersion},
                       {"method", r.method},
                       {"coef_names", r.coef_names},
                       {"estimates", r.estimates},
                       {"raw_estimates", r.raw_estimates},
                       {"objective", r.objective},
                       {"n_rows", r.n_rows},
                       {"n_pairs", r.n_pairs},
                       {"restarts", r.restarts},
                       {"agree_fraction", r.agree_fraction},
                       {"improved_over_starts", r.improved_over_starts},
                       {"seed", r.seed},
                       {"config_hash", r.config_hash},
                       {"notes", r.notes},
                       {"extra", r.extra}};
}

inline void from_json(const nlohmann::json& j, EstimateReport& r) {
    r.method = j.at("method").get<std::string>();
    r.coef_names = j.at("coef_names").get<std::vector<std::string>>();
    r.estimates = j.at("estimates").get<VecD>();
    r.raw_estimates = j.value("raw_estimates", VecD{});
    r.objective = j.value("objective", 0.0);
    r.n_rows = j.value("n_rows", std::size_t{0});
    r.n_pairs = j.value("n_pairs", std::size_t{0});
    r.restarts = j.value("restarts", 0);
    r.agree_fraction = j.value("agree_fraction", 1.0);
    r.improved_over_starts = j.value("improved_over_starts", true);
    r.seed = j.value("seed", std::uint64_t{0});
    r.config_hash = j.value("config_hash", std::string{});
    r.notes = j.value("notes", std::vector<std::string>{});
    r.extra = j.value("extra", nlohmann::json::object());
}

}  // namespace pmrank
