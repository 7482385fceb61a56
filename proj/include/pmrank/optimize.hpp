#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "pmrank/common.hpp"

namespace pmrank {

using ObjectiveFn = std::function<double(const VecD&)>;

struct OptResult {
    VecD x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    int max_iter = 300;
    double f_tol = 1e-12;
    double x_tol = 1e-9;
    double init_step = 0.5;
};

// Standard Nelder-Mead simplex minimizer (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5). Deterministic given the start point.
inline OptResult nelder_mead_min(const ObjectiveFn& f, const VecD& x0,
                                 const NelderMeadOptions& opt = {}) {
    const int n = static_cast<int>(x0.size());
    if (n == 0) return {x0, f(x0), 0, true};
    std::vector<VecD> pts(n + 1, x0);
    VecD fs(n + 1);
    for (int i = 0; i < n; ++i) pts[i + 1][i] += opt.init_step;
    for (int i = 0; i <= n; ++i) fs[i] = f(pts[i]);

    auto order = [&]() {
        std::vector<int> idx(n + 1);
        for (int i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        std::vector<VecD> p2(n + 1);
        VecD f2(n + 1);
        for (int i = 0; i <= n; ++i) {
            p2[i] = pts[idx[i]];
            f2[i] = fs[idx[i]];
        }
        pts = std::move(p2);
        fs = std::move(f2);
    };

    OptResult res;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        order();
        double spread = 0.0, xspread = 0.0;
        for (int i = 0; i <= n; ++i) {
            spread = std::max(spread, std::abs(fs[i] - fs[0]));
            for (int k = 0; k < n; ++k)
                xspread = std::max(xspread, std::abs(pts[i][k] - pts[0][k]));
        }
        if (spread < opt.f_tol && xspread < opt.x_tol) {
            res.converged = true;
            break;
        }
        VecD centroid(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) centroid[k] += pts[i][k] / n;
        auto blend = [&](double t) {
            VecD p(n);
            for (int k = 0; k < n; ++k) p[k] = centroid[k] + t * (pts[n][k] - centroid[k]);
            return p;
        };
        const VecD xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fs[0]) {
            const VecD xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                pts[n] = xe;
                fs[n] = fe;
            } else {
                pts[n] = xr;
                fs[n] = fr;
            }
        } else if (fr < fs[n - 1]) {
            pts[n] = xr;
            fs[n] = fr;
        } else {
            const bool outside = fr < fs[n];
            const VecD xc = blend(outside ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fs[n])) {
                pts[n] = xc;
                fs[n] = fc;
            } else {  // shrink toward the best vertex
                for (int i = 1; i <= n; ++i) {
                    for (int k = 0; k < n; ++k) pts[i][k] = 0.5 * (pts[i][k] + pts[0][k]);
                    fs[i] = f(pts[i]);
                }
            }
        }
    }
    order();
    res.x = pts[0];
    res.f = fs[0];
    res.iterations = it;
    return res;
}

struct BfgsOptions {
    int max_iter = 150;
    double grad_tol = 1e-6;
    double f_tol = 1e-10;
    double fd_step = 1e-5;
};

// BFGS with central-difference gradients and Armijo backtracking. The
// objectives it sees are smooth by construction (logistic-smoothed), so a
// dense inverse-Hessian update is enough at these dimensions.
inline OptResult bfgs_min(const ObjectiveFn& f, const VecD& x0, const BfgsOptions& opt = {}) {
    const int n = static_cast<int>(x0.size());
    VecD x = x0;
    double fx = f(x);
    std::vector<VecD> H(n, VecD(n, 0.0));
    for (int i = 0; i < n; ++i) H[i][i] = 1.0;

    auto gradient = [&](const VecD& at) {
        VecD g(n);
        VecD p = at;
        for (int k = 0; k < n; ++k) {
            const double h = opt.fd_step * std::max(1.0, std::abs(at[k]));
            p[k] = at[k] + h;
            const double fp = f(p);
            p[k] = at[k] - h;
            const double fm = f(p);
            p[k] = at[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        return g;
    };

    VecD g = gradient(x);
    OptResult res;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax < opt.grad_tol) {
            res.converged = true;
            break;
        }
        VecD dir(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) dir[i] -= H[i][k] * g[k];
        double slope = dot(dir, g);
        if (slope >= 0.0) {  // reset to steepest descent
            for (int i = 0; i < n; ++i) {
                for (int k = 0; k < n; ++k) H[i][k] = (i == k) ? 1.0 : 0.0;
                dir[i] = -g[i];
            }
            slope = dot(dir, g);
        }
        double step = 1.0;
        VecD xn(n);
        double fn = fx;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            for (int k = 0; k < n; ++k) xn[k] = x[k] + step * dir[k];
            fn = f(xn);
            if (fn <= fx + 1e-4 * step * slope) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) break;
        const VecD gn = gradient(xn);
        VecD s(n), y(n);
        for (int k = 0; k < n; ++k) {
            s[k] = xn[k] - x[k];
            y[k] = gn[k] - g[k];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12) {
            // H <- (I - s y'/sy) H (I - y s'/sy) + s s'/sy
            VecD Hy(n, 0.0);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) Hy[i] += H[i][k] * y[k];
            const double yHy = dot(y, Hy);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k)
                    H[i][k] += ((sy + yHy) * s[i] * s[k]) / (sy * sy) -
                               (Hy[i] * s[k] + s[i] * Hy[k]) / sy;
        }
        const bool tiny = std::abs(fn - fx) < opt.f_tol * (std::abs(fx) + 1e-12);
        x = xn;
        fx = fn;
        g = gn;
        if (tiny) {
            res.converged = true;
            ++it;
            break;
        }
    }
    res.x = x;
    res.f = fx;
    res.iterations = it;
    return res;
}

}  // namespace pmrank
