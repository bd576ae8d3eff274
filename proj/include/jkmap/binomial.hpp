#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "jkmap/error.hpp"
#include "jkmap/order_statistics.hpp"

namespace jkmap::binomial {

// pi_{j,k} on the 2-point space {a, b}, as a map of p = theta(a):
//
//   pi(p) = P(Bin(k,p) > k-j) / (P(Bin(k,p) > k-j) + P(Bin(k,p) < j)).
//
// The two terms are the b->a and a->b transition probabilities.
inline double map(double p, int j, int k) {
    check_order(j, k);
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("binomial map: p outside [0,1]");
    if (p == 0.0 || p == 1.0) return p;
    const double to_a = binomial_tail_ge(k, p, k - j + 1);
    const double to_b = binomial_tail_lt(k, p, j);
    return to_a / (to_a + to_b);
}

enum class Behavior { I, II, III };

inline const char* to_string(Behavior b) noexcept {
    switch (b) {
        case Behavior::I: return "I";
        case Behavior::II: return "II";
        default: return "III";
    }
}

struct Classification {
    int k = 0, j = 0;
    Behavior type = Behavior::I;
    std::optional<double> p_crit;           // smallest interior root on (0, 1/2), type III only
    std::vector<double> interior_roots;     // all roots found on (0, 1/2)
};

inline constexpr int grid_points = 10'000;
inline constexpr double root_tolerance = 1e-12;
inline constexpr int limit_iterations = 1000;
inline constexpr double limit_threshold = 1e-9;
inline constexpr double limit_start = 0.25;

// g(p) = map(p) - p, in long double for the sign tests near roots.
inline long double gap(double p, int j, int k) { return static_cast<long double>(map(p, j, k)) - p; }

// Roots of g on (0, 1/2): sign changes on a uniform grid, refined by bisection.
inline std::vector<double> interior_roots(int j, int k) {
    check_order(j, k);
    std::vector<double> roots;
    const double hstep = 0.5 / grid_points;
    double a = hstep;
    long double ga = gap(a, j, k);
    for (int i = 2; i < grid_points; ++i) {
        const double b = i * hstep;
        const long double gb = gap(b, j, k);
        if (ga == 0.0L) {
            roots.push_back(a);
        } else if ((ga < 0.0L) != (gb < 0.0L) && gb != 0.0L) {
            double lo = a, hi = b;
            long double glo = ga;
            while (hi - lo > root_tolerance) {
                const double mid = 0.5 * (lo + hi);
                const long double gm = gap(mid, j, k);
                if (gm == 0.0L) {
                    lo = hi = mid;
                    break;
                }
                if ((gm < 0.0L) == (glo < 0.0L)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        a = b;
        ga = gb;
    }
    return roots;
}

// Limit of the iterates from p0: 0, 1/2, or nullopt if neither is reached.
inline std::optional<double> iteration_limit(double p0, int j, int k, int iterations = limit_iterations) {
    double p = p0;
    for (int i = 0; i < iterations; ++i) {
        p = map(p, j, k);
        if (p < limit_threshold) return 0.0;
        if (std::abs(p - 0.5) < limit_threshold) return 0.5;
    }
    return std::nullopt;
}

inline Classification classify(int j, int k) {
    check_order(j, k);
    Classification c;
    c.j = j;
    c.k = k;
    c.interior_roots = interior_roots(j, k);
    if (!c.interior_roots.empty()) {
        c.type = Behavior::III;
        c.p_crit = c.interior_roots.front();
        return c;
    }
    const auto lim = iteration_limit(limit_start, j, k);
    if (lim) {
        c.type = *lim == 0.0 ? Behavior::I : Behavior::II;
    } else {
        // Slow convergence: fall back to the sign of g just below 1/2.
        c.type = gap(0.5 - 1e-3, j, k) > 0.0L ? Behavior::II : Behavior::I;
    }
    return c;
}

// All (j,k) with 2 <= k <= k_max, ordered by k then j.
inline std::vector<Classification> classification_table(int k_max) {
    if (k_max < 2 || k_max > 12) throw InvalidInput("classification_table: need 2 <= k_max <= 12");
    std::vector<Classification> out;
    for (int k = 2; k <= k_max; ++k)
        for (int j = 1; j <= k; ++j) out.push_back(classify(j, k));
    return out;
}

/// Sufficient condition for the absence of an invariant density on [0,1]:
/// j == k, or  k!/((j-1)! 1! (k-j)!) * (j-1)^(j-1) (k-j)^(k-j) / (k-1)^(k-1) <= 2
/// with 0^0 = 1.
inline double nonexistence_lhs(int j, int k) {
    check_order(j, k);
    auto pow0 = [](int base, int e) { return e == 0 ? 1.0L : std::pow(static_cast<long double>(base), e); };
    const long double multinomial =
        std::exp(std::lgamma(static_cast<long double>(k) + 1) - std::lgamma(static_cast<long double>(j)) -
                 std::lgamma(static_cast<long double>(k - j) + 1));
    return static_cast<double>(multinomial * pow0(j - 1, j - 1) * pow0(k - j, k - j) / pow0(k - 1, k - 1));
}

inline bool density_nonexistence_check(int j, int k) {
    check_order(j, k);
    return j == k || nonexistence_lhs(j, k) <= 2.0 + 1e-12;
}

}  // namespace jkmap::binomial
