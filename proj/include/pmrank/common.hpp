#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmrank {

inline constexpr int kSpecVersion = 1;

using VecD = std::vector<double>;

// Error taxonomy maps onto CLI exit codes: config 2, data 3, numeric 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const VecD& a, const VecD& b) {
    if (a.size() != b.size()) throw NumericError("dot: dimension mismatch");
    return dot(a.data(), b.data(), static_cast<int>(a.size()));
}

inline double norm2(const VecD& v) {
    return std::sqrt(dot(v.data(), v.data(), static_cast<int>(v.size())));
}

inline VecD scaled(VecD v, double c) {
    for (double& x : v) x *= c;
    return v;
}

inline double mean(const VecD& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_sd(const VecD& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    return std::sqrt(s2 / static_cast<double>(v.size() - 1));
}

inline double sample_corr(const VecD& a, const VecD& b) {
    if (a.size() != b.size() || a.size() < 2) throw NumericError("corr: bad inputs");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        sa += (a[i] - ma) * (a[i] - ma);
        sb += (b[i] - mb) * (b[i] - mb);
    }
    if (sa <= 0.0 || sb <= 0.0) return 0.0;
    return sab / std::sqrt(sa * sb);
}

// Order statistic with linear interpolation (type 7), monotone in level.
inline double quantile(VecD sorted_values, double p) {
    if (sorted_values.empty()) throw NumericError("quantile of empty sample");
    const std::size_t n = sorted_values.size();
    if (p <= 0.0) return sorted_values.front();
    if (p >= 1.0) return sorted_values.back();
    const double h = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= n) return sorted_values.back();
    return sorted_values[lo] * (1.0 - frac) + sorted_values[lo + 1] * frac;
}

// FNV-1a over a canonical string; used to stamp reports with a config hash.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace pmrank
