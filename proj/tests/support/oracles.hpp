#pragma once

// Independent brute-force oracles for every rank objective: direct nested
// transcriptions of the defining triple sums, kept free of the workspace and
// precomputation tricks used by the library implementations.

#include <functional>

#include "pmrank/distributions.hpp"
#include "pmrank/market.hpp"
#include "pmrank/rng.hpp"

namespace pmrank::testsupport {

inline double ind(bool c) { return c ? 1.0 : 0.0; }

struct QLines {
    double line1 = 0.0, line2 = 0.0, line3 = 0.0;
    double total() const { return line1 + line2 + line3; }
};

inline double choose2(std::size_t n) { return 0.5 * static_cast<double>(n) * (n - 1); }

inline bool vec_eq(const double* a, const double* b, int q) {
    for (int k = 0; k < q; ++k)
        if (a[k] != b[k]) return false;
    return true;
}

inline double stack_norm(const double* a1, const double* a2, const double* b1, const double* b2,
                         int q1, int q2) {
    double d2 = 0.0;
    for (int k = 0; k < q1; ++k) d2 += (a1[k] - b1[k]) * (a1[k] - b1[k]);
    for (int k = 0; k < q2; ++k) d2 += (a2[k] - b2[k]) * (a2[k] - b2[k]);
    return std::sqrt(d2);
}

inline QLines oracle_ideal_lines(const PairOutcomeTable& t, const VecD& b, const VecD& m) {
    const int qx = t.q_x, qz = t.q_z;
    QLines q;
    for (std::size_t a = 0; a < t.rows(); ++a) {
        for (std::size_t a2 = a + 1; a2 < t.rows(); ++a2) {
            VecD xd1(qx), xd2(qx);
            for (int k = 0; k < qx; ++k) {
                xd1[k] = t.xi_at(a)[k] - t.xj_at(a)[k];
                xd2[k] = t.xi_at(a2)[k] - t.xj_at(a2)[k];
            }
            const double xb1 = dot(xd1.data(), b.data(), qx);
            const double xb2 = dot(xd2.data(), b.data(), qx);
            const double zim1 = dot(t.zi_at(a), m.data(), qz);
            const double zim2 = dot(t.zi_at(a2), m.data(), qz);
            const double zjm1 = dot(t.zj_at(a), m.data(), qz);
            const double zjm2 = dot(t.zj_at(a2), m.data(), qz);
            const double sgt = ind(t.s[a] > t.s[a2]);
            const double slt = ind(t.s[a] < t.s[a2]);

            const double m1 =
                ind(vec_eq(t.zi_at(a), t.zi_at(a2), qz) && vec_eq(t.zj_at(a), t.zj_at(a2), qz));
            q.line1 += m1 * (ind(xb1 > xb2) * sgt + ind(xb1 < xb2) * slt);

            const double m2 =
                ind(vec_eq(t.zi_at(a), t.zi_at(a2), qz) && vec_eq(xd1.data(), xd2.data(), qx));
            q.line2 += m2 * (ind(zjm1 > zjm2) * sgt + ind(zjm1 < zjm2) * slt);

            const double m3 =
                ind(vec_eq(t.zj_at(a), t.zj_at(a2), qz) && vec_eq(xd1.data(), xd2.data(), qx));
            q.line3 += m3 * (ind(zim1 < zim2) * sgt + ind(zim1 > zim2) * slt);
        }
    }
    const double denom = choose2(t.rows());
    q.line1 /= denom;
    q.line2 /= denom;
    q.line3 /= denom;
    return q;
}

inline QLines oracle_smoothed_lines(const PairOutcomeTable& t, const VecD& b, const VecD& m,
                                    double sigma) {
    const int qx = t.q_x, qz = t.q_z;
    QLines q;
    for (std::size_t a = 0; a < t.rows(); ++a) {
        for (std::size_t a2 = a + 1; a2 < t.rows(); ++a2) {
            VecD xd1(qx), xd2(qx);
            for (int k = 0; k < qx; ++k) {
                xd1[k] = t.xi_at(a)[k] - t.xj_at(a)[k];
                xd2[k] = t.xi_at(a2)[k] - t.xj_at(a2)[k];
            }
            const double xb1 = dot(xd1.data(), b.data(), qx);
            const double xb2 = dot(xd2.data(), b.data(), qx);
            const double zim1 = dot(t.zi_at(a), m.data(), qz);
            const double zim2 = dot(t.zi_at(a2), m.data(), qz);
            const double zjm1 = dot(t.zj_at(a), m.data(), qz);
            const double zjm2 = dot(t.zj_at(a2), m.data(), qz);
            const double sgt = ind(t.s[a] > t.s[a2]);
            const double slt = ind(t.s[a] < t.s[a2]);

            const double k1 =
                normal_pdf(stack_norm(t.zi_at(a), t.zj_at(a), t.zi_at(a2), t.zj_at(a2), qz, qz) /
                           sigma);
            q.line1 += k1 * (ind(xb1 > xb2) * sgt + ind(xb1 < xb2) * slt);

            const double k2 =
                normal_pdf(stack_norm(t.zi_at(a), xd1.data(), t.zi_at(a2), xd2.data(), qz, qx) /
                           sigma);
            q.line2 += k2 * (ind(zjm1 > zjm2) * sgt + ind(zjm1 < zjm2) * slt);

            const double k3 =
                normal_pdf(stack_norm(t.zj_at(a), xd1.data(), t.zj_at(a2), xd2.data(), qz, qx) /
                           sigma);
            q.line3 += k3 * (ind(zim1 < zim2) * sgt + ind(zim1 > zim2) * slt);
        }
    }
    const double denom = choose2(t.rows());
    q.line1 /= denom;
    q.line2 /= denom;
    q.line3 /= denom;
    return q;
}

// The single-line rank objectives (known-G^-1, sieve GQ, ZQ, DQ) differ only
// in the index h; the oracle takes h per row.
inline double oracle_rank_objective(const PairOutcomeTable& t,
                                    const std::function<double(std::size_t)>& h) {
    double acc = 0.0;
    for (std::size_t a = 0; a < t.rows(); ++a)
        for (std::size_t a2 = a + 1; a2 < t.rows(); ++a2) {
            acc += ind(h(a) > h(a2)) * ind(t.s[a] > t.s[a2]) +
                   ind(h(a) < h(a2)) * ind(t.s[a] < t.s[a2]);
        }
    return acc / choose2(t.rows());
}

// Random small fixture with optional discrete z grid (so exact matches
// happen) and optional exact duplicate blocks.
inline PairOutcomeTable random_fixture_table(Rng& rng, int rows, bool discrete_z,
                                             bool duplicate_blocks) {
    PairOutcomeTable t;
    t.product_i = 1;
    t.product_j = 2;
    t.q_x = 2;
    t.q_z = 2;
    t.x_names = {"price", "x2"};
    t.z_names = {"position", "z2"};
    for (int r = 0; r < rows; ++r) {
        VecD xi(2), xj(2), zi(2), zj(2);
        if (duplicate_blocks && r >= rows / 2) {
            // copy covariates from the mirrored row, fresh S
            const int src = r - rows / 2;
            xi.assign(t.xi_at(src), t.xi_at(src) + 2);
            xj.assign(t.xj_at(src), t.xj_at(src) + 2);
            zi.assign(t.zi_at(src), t.zi_at(src) + 2);
            zj.assign(t.zj_at(src), t.zj_at(src) + 2);
        } else {
            for (int k = 0; k < 2; ++k) {
                xi[k] = rng.normal();
                xj[k] = rng.normal();
                if (discrete_z) {
                    zi[k] = static_cast<double>(1 + static_cast<int>(rng.next_u64() % 3));
                    zj[k] = static_cast<double>(1 + static_cast<int>(rng.next_u64() % 3));
                } else {
                    zi[k] = rng.normal();
                    zj[k] = rng.normal();
                }
            }
        }
        const int s = rng.uniform01() < 0.5 ? 0 : 1;
        t.push_row(r, s, xi.data(), xj.data(), zi.data(), zj.data());
    }
    return t;
}

}  // namespace pmrank::testsupport
