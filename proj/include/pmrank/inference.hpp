#pragma once

#include <functional>
#include <optional>

#include "json.hpp"
#include "pmrank/common.hpp"
#include "pmrank/parallel.hpp"
#include "pmrank/rng.hpp"

namespace pmrank {

// Politis-Romano style subsampling without replacement at consumer level.
// Maximum-score-type estimators converge at the cube-root rate, hence the
// default rate exponent 1/3 in the centering and rescaling.
struct SubsampleConfig {
    int n_replications = 350;
    double size_exponent = 2.0 / 3.0;
    int subsample_size = 0;  // 0 = ceil(n^size_exponent)
    double ci_level = 0.95;
    enum class PMode { Centered, Uncentered } p_mode = PMode::Centered;
    double rate_exponent = 1.0 / 3.0;
    double max_fail_frac = 0.10;
    std::uint64_t seed = 99;

    void validate(int n) const {
        if (n_replications < 50) throw ConfigError("subsampling needs >= 50 replications");
        const int b = effective_size(n);
        if (b <= 0 || b >= n) throw ConfigError("subsample size must be inside (0, n)");
        if (!(ci_level > 0.0) || !(ci_level < 1.0)) throw ConfigError("bad CI level");
        if (!(rate_exponent > 0.0)) throw ConfigError("rate exponent must be positive");
    }

    int effective_size(int n) const {
        if (subsample_size > 0) return subsample_size;
        return static_cast<int>(std::ceil(std::pow(static_cast<double>(n), size_exponent)));
    }

    nlohmann::json to_json_obj() const {
        return nlohmann::json{
            {"spec_version", kSpecVersion},
            {"n_replications", n_replications},
            {"size_exponent", size_exponent},
            {"subsample_size", subsample_size},
            {"ci_level", ci_level},
            {"p_mode", p_mode == PMode::Centered ? "centered" : "uncentered"},
            {"rate_exponent", rate_exponent},
            {"max_fail_frac", max_fail_frac},
            {"seed", seed}};
    }
};

inline SubsampleConfig subsample_config_from_json(const nlohmann::json& j) {
    SubsampleConfig c;
    c.n_replications = j.value("n_replications", 350);
    c.size_exponent = j.value("size_exponent", 2.0 / 3.0);
    c.subsample_size = j.value("subsample_size", 0);
    c.ci_level = j.value("ci_level", 0.95);
    const std::string mode = j.value("p_mode", "centered");
    if (mode == "centered")
        c.p_mode = SubsampleConfig::PMode::Centered;
    else if (mode == "uncentered")
        c.p_mode = SubsampleConfig::PMode::Uncentered;
    else
        throw ConfigError("unknown p_mode: " + mode);
    c.rate_exponent = j.value("rate_exponent", 1.0 / 3.0);
    c.max_fail_frac = j.value("max_fail_frac", 0.10);
    c.seed = j.value("seed", std::uint64_t{99});
    return c;
}

// estimator over a consumer-id subset; nullopt marks a failed replication
using SubsampleEstimator =
    std::function<std::optional<VecD>(const std::vector<int>& consumer_ids)>;

struct InferenceResult {
    std::vector<std::string> coef_names;
    VecD estimate;
    VecD ci_lo, ci_hi;
    VecD p_values;
    int n_consumers = 0;
    int subsample_size = 0;
    int replications = 0;
    int failures = 0;
    SubsampleConfig config;
    std::vector<VecD> subsample_estimates;  // retained for re-leveling

    // CI at an arbitrary level from the stored subsample draws
    std::pair<double, double> ci_at(double level, std::size_t k) const {
        const double tau_n = std::pow(static_cast<double>(n_consumers), config.rate_exponent);
        const double tau_b = std::pow(static_cast<double>(subsample_size), config.rate_exponent);
        VecD draws;
        draws.reserve(subsample_estimates.size());
        if (config.p_mode == SubsampleConfig::PMode::Uncentered) {
            for (const auto& th : subsample_estimates) draws.push_back(th[k]);
            std::sort(draws.begin(), draws.end());
            return {quantile(draws, (1.0 - level) / 2.0), quantile(draws, (1.0 + level) / 2.0)};
        }
        for (const auto& th : subsample_estimates)
            draws.push_back(tau_b * (th[k] - estimate[k]));
        std::sort(draws.begin(), draws.end());
        const double q_lo = quantile(draws, (1.0 - level) / 2.0);
        const double q_hi = quantile(draws, (1.0 + level) / 2.0);
        return {estimate[k] - q_hi / tau_n, estimate[k] - q_lo / tau_n};
    }

    nlohmann::json to_json_obj() const {
        nlohmann::json coefs = nlohmann::json::array();
        for (std::size_t k = 0; k < estimate.size(); ++k)
            coefs.push_back({{"name", k < coef_names.size() ? coef_names[k] : ""},
                             {"estimate", estimate[k]},
                             {"ci_lo", ci_lo[k]},
                             {"ci_hi", ci_hi[k]},
                             {"p_value", p_values[k]}});
        return nlohmann::json{{"spec_version", kSpecVersion},
                              {"coefficients", coefs},
                              {"n_consumers", n_consumers},
                              {"subsample_size", subsample_size},
                              {"replications", replications},
                              {"failures", failures},
                              {"config", config.to_json_obj()},
                              {"note", "subsample size rule is a default, not from the source "
                                       "estimation conventions"}};
    }
};

inline InferenceResult subsample_inference(const SubsampleEstimator& estimator,
                                           std::vector<int> consumer_ids,
                                           const SubsampleConfig& cfg,
                                           const std::vector<std::string>& coef_names = {}) {
    std::sort(consumer_ids.begin(), consumer_ids.end());
    consumer_ids.erase(std::unique(consumer_ids.begin(), consumer_ids.end()),
                       consumer_ids.end());
    const int n = static_cast<int>(consumer_ids.size());
    cfg.validate(n);
    const int b = cfg.effective_size(n);

    const auto full = estimator(consumer_ids);
    if (!full) throw DataError("full-sample estimation failed");

    InferenceResult res;
    res.coef_names = coef_names;
    res.estimate = *full;
    res.n_consumers = n;
    res.subsample_size = b;
    res.config = cfg;

    std::vector<std::optional<VecD>> reps(cfg.n_replications);
    parallel_for(cfg.n_replications, [&](int r) {
        Rng rng = Rng::stream(cfg.seed, 0x5AB5u, static_cast<std::uint64_t>(r));
        const auto pick = rng.sample_without_replacement(n, b);
        std::vector<int> ids;
        ids.reserve(b);
        for (int idx : pick) ids.push_back(consumer_ids[idx]);
        std::sort(ids.begin(), ids.end());
        try {
            reps[r] = estimator(ids);
        } catch (const std::exception&) {
            reps[r] = std::nullopt;
        }
    });
    for (auto& r : reps) {
        if (r)
            res.subsample_estimates.push_back(std::move(*r));
        else
            ++res.failures;
    }
    res.replications = cfg.n_replications;
    if (res.failures > cfg.max_fail_frac * cfg.n_replications)
        throw DataError("subsampling aborted: " + std::to_string(res.failures) + " of " +
                        std::to_string(cfg.n_replications) + " replications failed");

    const std::size_t dim = res.estimate.size();
    const double tau_n = std::pow(static_cast<double>(n), cfg.rate_exponent);
    res.ci_lo.resize(dim);
    res.ci_hi.resize(dim);
    res.p_values.resize(dim);
    const double r_count = static_cast<double>(res.subsample_estimates.size());
    for (std::size_t k = 0; k < dim; ++k) {
        const auto [lo, hi] = res.ci_at(cfg.ci_level, k);
        res.ci_lo[k] = lo;
        res.ci_hi[k] = hi;
        if (cfg.p_mode == SubsampleConfig::PMode::Centered) {
            const double t_stat = tau_n * std::abs(res.estimate[k]);
            const double tau_b = std::pow(static_cast<double>(b), cfg.rate_exponent);
            double count = 0.0;
            for (const auto& th : res.subsample_estimates)
                if (std::abs(tau_b * (th[k] - res.estimate[k])) >= t_stat) count += 1.0;
            res.p_values[k] = (count + 1.0) / (r_count + 1.0);
        } else {
            double le = 0.0, ge = 0.0;
            for (const auto& th : res.subsample_estimates) {
                if (th[k] <= 0.0) le += 1.0;
                if (th[k] >= 0.0) ge += 1.0;
            }
            res.p_values[k] =
                std::min(1.0, 2.0 * std::max(1.0, std::min(le, ge)) / (r_count + 1.0));
        }
    }
    return res;
}

}  // namespace pmrank
