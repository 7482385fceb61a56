#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "json.hpp"
#include "pmrank/common.hpp"
#include "pmrank/distributions.hpp"

namespace pmrank {

namespace detail {

// Adaptive Simpson on [a,b]. Integrands here are bounded monotone survival
// functions, so the standard error estimate is reliable.
inline double simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                          double fb, double m, double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = left + right - whole;
    if (depth <= 0 || std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
    return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 52);
}

// stable log(1 + exp(x))
inline double softplus(double x) {
    if (x > 36.0) return x + std::exp(-x);
    if (x < -745.0) return 0.0;
    return std::log1p(std::exp(x));
}

}  // namespace detail

// Marginal benefit of one more search at net threshold w:
//   G(w) = E[(eps - w)^+] = integral_w^inf (1 - F(eps)) d eps
// computed by quadrature of the survival function regardless of family.
// The truncation point is chosen so the analytic tail bound is < 1e-13:
// both the logistic and type-I EV survival tails are <= exp(-(T-loc)/scale),
// so integral_T^inf (1-F) <= scale * exp(-(T-loc)/scale).
inline double quadrature_marginal_benefit(double w, const MatchValueDist& dist) {
    dist.validate();
    if (!dist.density_backed()) throw NumericError("marginal benefit needs a density-backed family");
    if (!std::isfinite(w)) throw NumericError("marginal benefit at non-finite threshold");
    const double loc = dist.location();
    const double s = dist.scale();
    double upper;
    if (dist.family() == DistFamily::Normal) {
        upper = loc + 9.5 * s;  // normal tail of the integral at 9.5 sd is ~1e-20 * s
    } else {
        upper = loc + s * (36.0 + std::log1p(s));
    }
    if (w >= upper) return 0.0;
    auto survival = [&dist](double x) { return dist.survival(x); };
    // Pre-split so the transition region cannot be skipped inside a long
    // flat stretch when w is far below the location.
    std::vector<double> knots{w};
    for (double k : {loc - 6.0 * s, loc, loc + 6.0 * s, loc + 16.0 * s})
        if (k > w && k < upper) knots.push_back(k);
    knots.push_back(upper);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        total += detail::adaptive_simpson(survival, knots[i], knots[i + 1], 2.5e-13);
    return total;
}

inline double marginal_benefit(double w, const MatchValueDist& dist) {
    dist.validate();
    if (!std::isfinite(w)) throw NumericError("marginal benefit at non-finite threshold");
    const double loc = dist.location();
    const double s = dist.scale();
    switch (dist.family()) {
        case DistFamily::Normal: {
            const double t = (w - loc) / s;
            return s * (normal_pdf(t) - t * normal_sf(t));
        }
        case DistFamily::Logistic:
            // integral of the logistic survival has the softplus closed form
            return s * detail::softplus(-(w - loc) / s);
        case DistFamily::TypeIEV:
            return quadrature_marginal_benefit(w, dist);
        case DistFamily::Sieve:
            throw NumericError("marginal benefit undefined for the sieve family");
    }
    return 0.0;
}

// Solves G(w) = c on an auto-expanded bracket with the Illinois variant of
// regula falsi; G is strictly decreasing (Assumption-1 families), so the
// bracket is maintained exactly. Residual target 1e-10 absolute, and the
// bracket is shrunk further when the local slope allows it so that the
// G^-1(G(w)) round trip holds to ~1e-8 even where G is still steep.
inline double inverse_marginal_benefit(double c, const MatchValueDist& dist) {
    dist.validate();
    if (!std::isfinite(c) || !(c > 0.0))
        throw NumericError("inverse marginal benefit requires a finite positive cost");
    const double loc = dist.location();
    const double s = dist.scale();

    // Deep below the support, G(w) = E[eps] - w up to the vanishing term
    // integral_{-inf}^w F; at w <= loc - 38*scale that term is below machine
    // precision for every supported family, so the inverse is exact.
    {
        double mean = loc;
        if (dist.family() == DistFamily::TypeIEV) mean = loc + 0.57721566490153286 * s;
        if (mean - c <= loc - 40.0 * s) return mean - c;
    }

    double lo = loc - s;   // G(lo) should exceed c
    double hi = loc + s;   // G(hi) should fall below c
    double glo = marginal_benefit(lo, dist);
    double ghi = marginal_benefit(hi, dist);
    double step = s;
    int guard = 0;
    while (glo <= c) {
        lo -= step;
        step *= 2.0;
        glo = marginal_benefit(lo, dist);
        if (++guard > 200)
            throw NumericError("cost " + std::to_string(c) + " above attainable marginal benefit");
    }
    step = s;
    guard = 0;
    while (ghi >= c) {
        hi += step;
        step *= 2.0;
        ghi = marginal_benefit(hi, dist);
        if (++guard > 200)
            throw NumericError("cost " + std::to_string(c) +
                               " below attainable marginal benefit (upper tail)");
    }

    // f(w) = G(w) - c: f(lo) > 0 > f(hi)
    double flo = glo - c;
    double fhi = ghi - c;
    double w = hi;
    double fw = fhi;
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        w = (lo * fhi - hi * flo) / (fhi - flo);
        if (!std::isfinite(w) || w <= std::min(lo, hi) || w >= std::max(lo, hi))
            w = 0.5 * (lo + hi);
        fw = marginal_benefit(w, dist) - c;
        if (fw == 0.0) break;
        if (fw > 0.0) {
            lo = w;
            flo = fw;
            if (side == 1) fhi *= 0.5;  // Illinois scaling to avoid stalling
            side = 1;
        } else {
            hi = w;
            fhi = fw;
            if (side == -1) flo *= 0.5;
            side = -1;
        }
        const double width = std::abs(hi - lo);
        if (width <= 1e-13 * std::max(1.0, std::abs(w))) break;
        if (std::abs(fw) <= 1e-14 * std::max(1.0, c)) break;
    }
    // absolute 1e-10 on the contract range, relative once c outgrows it
    if (std::abs(fw) > 1e-10 * std::max(1.0, c))
        throw NumericError("inverse marginal benefit failed to converge");
    return w;
}

struct ReservationInputs {
    double search_cost = 0.0;
    double prior_utility = 0.0;
    MatchValueDist dist;
};

inline double reservation_utility(const ReservationInputs& in) {
    if (!std::isfinite(in.prior_utility)) throw NumericError("non-finite prior utility");
    return inverse_marginal_benefit(in.search_cost, in.dist) + in.prior_utility;
}

// Monotone interpolation cache for G^-1, log-spaced in cost. Queries outside
// the configured cost range are errors, never clamps: a clamped value would
// silently corrupt reservation-utility rankings downstream.
class GInverseTable {
   public:
    GInverseTable() = default;

    static GInverseTable build(const MatchValueDist& dist, double cost_lo, double cost_hi,
                               int n_grid) {
        if (n_grid < 16) throw ConfigError("GInverseTable needs n_grid >= 16");
        if (!(cost_lo > 0.0) || !(cost_hi > cost_lo))
            throw ConfigError("GInverseTable needs 0 < cost_lo < cost_hi");
        GInverseTable t;
        t.dist_ = dist;
        t.log_c_.resize(n_grid);
        t.w_.resize(n_grid);
        const double l0 = std::log(cost_lo);
        const double l1 = std::log(cost_hi);
        for (int i = 0; i < n_grid; ++i) {
            const double u = static_cast<double>(i) / static_cast<double>(n_grid - 1);
            t.log_c_[i] = l0 + (l1 - l0) * u;
            t.w_[i] = inverse_marginal_benefit(std::exp(t.log_c_[i]), dist);
        }
        for (int i = 0; i + 1 < n_grid; ++i)
            if (!(t.w_[i] > t.w_[i + 1]))
                throw NumericError("GInverseTable values are not strictly decreasing");
        t.compute_slopes();
        return t;
    }

    double cost_lo() const { return std::exp(log_c_.front()); }
    double cost_hi() const { return std::exp(log_c_.back()); }
    int size() const { return static_cast<int>(log_c_.size()); }
    const VecD& values() const { return w_; }
    const MatchValueDist& dist() const { return dist_; }

    bool covers(double cost) const {
        if (!(cost > 0.0)) return false;
        const double t = std::log(cost);
        return t >= log_c_.front() && t <= log_c_.back();
    }

    double lookup(double cost) const {
        if (!(cost > 0.0) || !std::isfinite(cost))
            throw NumericError("GInverseTable lookup at non-positive cost");
        const double t = std::log(cost);
        if (t < log_c_.front() || t > log_c_.back())
            throw NumericError("cost outside GInverseTable range [" +
                               std::to_string(cost_lo()) + ", " + std::to_string(cost_hi()) + "]");
        const auto it = std::upper_bound(log_c_.begin(), log_c_.end(), t);
        std::size_t k = static_cast<std::size_t>(std::distance(log_c_.begin(), it));
        if (k == 0) k = 1;
        if (k >= log_c_.size()) k = log_c_.size() - 1;
        const double h = log_c_[k] - log_c_[k - 1];
        const double u = (t - log_c_[k - 1]) / h;
        const double u2 = u * u, u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1;
        const double h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2;
        const double h11 = u3 - u2;
        return h00 * w_[k - 1] + h10 * h * d_[k - 1] + h01 * w_[k] + h11 * h * d_[k];
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"spec_version", kSpecVersion},
                              {"dist", dist_},
                              {"log_costs", log_c_},
                              {"values", w_}};
    }

    static GInverseTable from_json(const nlohmann::json& j) {
        GInverseTable t;
        t.dist_ = j.at("dist").get<MatchValueDist>();
        t.log_c_ = j.at("log_costs").get<VecD>();
        t.w_ = j.at("values").get<VecD>();
        if (t.log_c_.size() != t.w_.size() || t.log_c_.size() < 16)
            throw DataError("malformed GInverseTable payload");
        t.compute_slopes();
        return t;
    }

   private:
    // Hermite slopes from the exact derivative: by the inverse function rule
    // dG^-1/dc = 1/G'(w) = -1/(1-F(w)), so d w / d log c = -c / (1-F(w)).
    // Exact slopes keep the interpolant monotone and push the error to the
    // O(h^4) Hermite term.
    void compute_slopes() {
        const std::size_t n = log_c_.size();
        d_.assign(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double sv = dist_.survival(w_[k]);
            if (!(sv > 0.0))
                throw NumericError("GInverseTable slope undefined: survival underflow");
            d_[k] = -std::exp(log_c_[k]) / sv;
        }
    }

    MatchValueDist dist_;
    VecD log_c_;
    VecD w_;
    VecD d_;
};

// Table-backed G^-1 with an exact root-finding fallback outside the cached
// range; shared immutable state, safe across threads.
class CachedGinv {
   public:
    CachedGinv() = default;
    explicit CachedGinv(const MatchValueDist& dist, double cost_lo = 1e-6, double cost_hi = 1e3,
                        int n_grid = 1024)
        : dist_(dist), table_(GInverseTable::build(dist, cost_lo, cost_hi, n_grid)) {}

    double operator()(double cost) const {
        if (table_.covers(cost)) return table_.lookup(cost);
        return inverse_marginal_benefit(cost, dist_);
    }

    const MatchValueDist& dist() const { return dist_; }

   private:
    MatchValueDist dist_;
    GInverseTable table_;
};

}  // namespace pmrank
