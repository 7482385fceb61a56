#pragma once

#include <cmath>
#include <memory>
#include <string>

#include "json.hpp"
#include "pmrank/common.hpp"
#include "pmrank/rng.hpp"
#include "pmrank/sieve_spec.hpp"

namespace pmrank {

inline double normal_pdf(double x) {
    return 0.39894228040143267793994605993438 * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
}

// Survival function via erfc, accurate deep in the upper tail.
inline double normal_sf(double x) {
    return 0.5 * std::erfc(x * 0.70710678118654752440084436210485);
}

enum class DistFamily { Normal, TypeIEV, Logistic, Sieve };

// Match-value distribution family. Normal/TypeIEV/Logistic carry
// (location, scale); Sieve carries a fitted inverse-marginal-benefit curve
// and supports only that evaluation (it is not density-backed).
class MatchValueDist {
   public:
    MatchValueDist() : family_(DistFamily::Normal), location_(0.0), scale_(1.0) {}

    static MatchValueDist normal(double mean, double sd) {
        return MatchValueDist(DistFamily::Normal, mean, sd);
    }
    static MatchValueDist type1ev(double location, double scale) {
        return MatchValueDist(DistFamily::TypeIEV, location, scale);
    }
    static MatchValueDist logistic(double location, double scale) {
        return MatchValueDist(DistFamily::Logistic, location, scale);
    }
    static MatchValueDist sieve(SieveSpec spec) {
        MatchValueDist d(DistFamily::Sieve, 0.0, 1.0);
        spec.validate();
        d.sieve_ = std::make_shared<SieveSpec>(std::move(spec));
        return d;
    }

    DistFamily family() const { return family_; }
    double location() const { return location_; }
    double scale() const { return scale_; }
    const SieveSpec& sieve_spec() const {
        if (!sieve_) throw ConfigError("distribution has no sieve spec");
        return *sieve_;
    }

    bool density_backed() const { return family_ != DistFamily::Sieve; }

    void validate() const {
        if (family_ == DistFamily::Sieve) {
            sieve_spec().validate();
            return;
        }
        if (!std::isfinite(location_) || !std::isfinite(scale_) || !(scale_ > 0.0))
            throw ConfigError("distribution requires finite location and strictly positive scale");
    }

    double pdf(double x) const {
        switch (family_) {
            case DistFamily::Normal:
                return normal_pdf((x - location_) / scale_) / scale_;
            case DistFamily::TypeIEV: {
                const double t = (x - location_) / scale_;
                return std::exp(-t - std::exp(-t)) / scale_;
            }
            case DistFamily::Logistic: {
                const double t = std::abs(x - location_) / scale_;
                const double e = std::exp(-t);
                return e / (scale_ * (1.0 + e) * (1.0 + e));
            }
            case DistFamily::Sieve:
                throw NumericError("sieve family is not density-backed");
        }
        return 0.0;
    }

    double cdf(double x) const {
        switch (family_) {
            case DistFamily::Normal:
                return normal_cdf((x - location_) / scale_);
            case DistFamily::TypeIEV:
                return std::exp(-std::exp(-(x - location_) / scale_));
            case DistFamily::Logistic: {
                const double t = (x - location_) / scale_;
                if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
                const double e = std::exp(t);
                return e / (1.0 + e);
            }
            case DistFamily::Sieve:
                throw NumericError("sieve family is not density-backed");
        }
        return 0.0;
    }

    // 1 - cdf with stable upper tails
    double survival(double x) const {
        switch (family_) {
            case DistFamily::Normal:
                return normal_sf((x - location_) / scale_);
            case DistFamily::TypeIEV:
                return -std::expm1(-std::exp(-(x - location_) / scale_));
            case DistFamily::Logistic: {
                const double t = (x - location_) / scale_;
                if (t <= 0.0) return 1.0 / (1.0 + std::exp(t));
                const double e = std::exp(-t);
                return e / (1.0 + e);
            }
            case DistFamily::Sieve:
                throw NumericError("sieve family is not density-backed");
        }
        return 0.0;
    }

    double sample(Rng& rng) const {
        switch (family_) {
            case DistFamily::Normal:
                return rng.normal(location_, scale_);
            case DistFamily::TypeIEV:
                return rng.gumbel(location_, scale_);
            case DistFamily::Logistic:
                return rng.logistic(location_, scale_);
            case DistFamily::Sieve:
                throw NumericError("sieve family is not density-backed");
        }
        return 0.0;
    }

    std::string name() const {
        char buf[64];
        switch (family_) {
            case DistFamily::Normal:
                std::snprintf(buf, sizeof(buf), "normal(%g,%g)", location_, scale_);
                break;
            case DistFamily::TypeIEV:
                std::snprintf(buf, sizeof(buf), "type1ev(%g,%g)", location_, scale_);
                break;
            case DistFamily::Logistic:
                std::snprintf(buf, sizeof(buf), "logistic(%g,%g)", location_, scale_);
                break;
            case DistFamily::Sieve:
                std::snprintf(buf, sizeof(buf), "sieve(deg=%d)", sieve_spec().degree);
                break;
        }
        return std::string(buf);
    }

   private:
    MatchValueDist(DistFamily f, double loc, double sc) : family_(f), location_(loc), scale_(sc) {
        if (f != DistFamily::Sieve) validate();
    }

    DistFamily family_;
    double location_;
    double scale_;
    std::shared_ptr<const SieveSpec> sieve_;
};

inline std::string family_tag(DistFamily f) {
    switch (f) {
        case DistFamily::Normal:
            return "normal";
        case DistFamily::TypeIEV:
            return "type1ev";
        case DistFamily::Logistic:
            return "logistic";
        case DistFamily::Sieve:
            return "sieve";
    }
    return "?";
}

inline void to_json(nlohmann::json& j, const MatchValueDist& d) {
    if (d.family() == DistFamily::Sieve) {
        j = nlohmann::json{{"family", "sieve"}, {"params", d.sieve_spec()}};
        return;
    }
    j = nlohmann::json{{"family", family_tag(d.family())},
                       {"params", {{"location", d.location()}, {"scale", d.scale()}}}};
}

inline void from_json(const nlohmann::json& j, MatchValueDist& d) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "sieve") {
        d = MatchValueDist::sieve(j.at("params").get<SieveSpec>());
        return;
    }
    const auto& p = j.at("params");
    double loc, sc;
    if (p.contains("location")) {
        loc = p.at("location").get<double>();
        sc = p.at("scale").get<double>();
    } else {  // normal family also accepts {mean, sd}
        loc = p.at("mean").get<double>();
        sc = p.at("sd").get<double>();
    }
    if (fam == "normal")
        d = MatchValueDist::normal(loc, sc);
    else if (fam == "type1ev")
        d = MatchValueDist::type1ev(loc, sc);
    else if (fam == "logistic")
        d = MatchValueDist::logistic(loc, sc);
    else
        throw ConfigError("unknown distribution family: " + fam);
}

}  // namespace pmrank
