#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "jkmap/error.hpp"

namespace jkmap {

inline void check_order(int j, int k) {
    if (k < 2 || j < 1 || j > k)
        throw InvalidInput("need 1 <= j <= k and k >= 2, got j=" + std::to_string(j) +
                           " k=" + std::to_string(k));
}

// P(Bin(k, q) >= j), summed term by term in long double.
// Terms are built from the mode outward in ratio form so that k up to 64
// never forms a huge binomial coefficient.
inline double binomial_tail_ge(int k, double q, int j) {
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("binomial_tail_ge: q outside [0,1]");
    if (k < 0) throw InvalidInput("binomial_tail_ge: negative k");
    if (j <= 0) return 1.0;
    if (j > k) return 0.0;
    if (q == 0.0) return 0.0;
    if (q == 1.0) return 1.0;

    // pmf by recurrence: p(i+1) = p(i) * (k-i)/(i+1) * q/(1-q), starting at p(0) = (1-q)^k.
    // Work in logs for p(0) to avoid underflow when q is close to 1.
    const long double lq = std::log(static_cast<long double>(q));
    const long double l1q = std::log1p(-static_cast<long double>(q));
    std::vector<long double> logpmf(static_cast<std::size_t>(k) + 1);
    long double lbin = 0.0L;
    for (int i = 0; i <= k; ++i) {
        logpmf[static_cast<std::size_t>(i)] = lbin + i * lq + (k - i) * l1q;
        lbin += std::log(static_cast<long double>(k - i)) - std::log(static_cast<long double>(i + 1));
    }
    // Sum the smaller tail directly; take the complement only when the result is large.
    long double upper = 0.0L, lower = 0.0L;
    if (static_cast<double>(j) > k * q) {
        for (int i = k; i >= j; --i) upper += std::exp(logpmf[static_cast<std::size_t>(i)]);
        return static_cast<double>(upper);
    }
    for (int i = 0; i < j; ++i) lower += std::exp(logpmf[static_cast<std::size_t>(i)]);
    return static_cast<double>(1.0L - lower);
}

// P(Bin(k, q) < j) computed directly (not as a complement), for ratios near 0.
inline double binomial_tail_lt(int k, double q, int j) {
    if (j <= 0) return 0.0;
    if (j > k) return 1.0;
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("binomial_tail_lt: q outside [0,1]");
    if (q == 0.0) return 1.0;
    if (q == 1.0) return 0.0;
    // Mirror: P(Bin(k,q) < j) = P(Bin(k,1-q) > k-j) = P(Bin(k,1-q) >= k-j+1).
    return binomial_tail_ge(k, 1.0 - q, k - j + 1);
}

}  // namespace jkmap
