#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jkmap/error.hpp"

namespace jkmap {

/// Per-row nearest-neighbour ordering of a finite space.
///
/// `rank(i, t) == m` means point t is the m'th closest to point i, counting i
/// itself as rank 1. Ranks are 1-based as in the usual presentation; storage is
/// row-major.
class RankMatrix {
public:
    RankMatrix() = default;

    RankMatrix(std::size_t n, std::vector<int> ranks) : n_(n), r_(std::move(ranks)) {
        if (n_ == 0) throw InvalidInput("rank matrix must have at least one point");
        if (r_.size() != n_ * n_) throw InvalidInput("rank matrix storage is not n*n");
        std::vector<char> seen(n_ + 1);
        for (std::size_t i = 0; i < n_; ++i) {
            std::fill(seen.begin(), seen.end(), 0);
            for (std::size_t t = 0; t < n_; ++t) {
                const int v = (*this)(i, t);
                if (v < 1 || static_cast<std::size_t>(v) > n_ || seen[static_cast<std::size_t>(v)])
                    throw InvalidInput("rank matrix row " + std::to_string(i) + " is not a permutation of 1..n");
                seen[static_cast<std::size_t>(v)] = 1;
            }
            if ((*this)(i, i) != 1)
                throw InvalidInput("rank matrix diagonal entry " + std::to_string(i) + " is not 1");
        }
    }

    static RankMatrix from_rows(const std::vector<std::vector<int>>& rows) {
        std::vector<int> flat;
        flat.reserve(rows.size() * rows.size());
        for (const auto& row : rows) {
            if (row.size() != rows.size()) throw InvalidInput("rank matrix is not square");
            flat.insert(flat.end(), row.begin(), row.end());
        }
        return RankMatrix(rows.size(), std::move(flat));
    }

    std::size_t size() const noexcept { return n_; }
    int operator()(std::size_t i, std::size_t t) const noexcept { return r_[i * n_ + t]; }
    std::span<const int> row(std::size_t i) const noexcept { return {r_.data() + i * n_, n_}; }

    // order(i)[m-1] is the point holding rank m in row i.
    std::vector<std::size_t> order(std::size_t i) const {
        std::vector<std::size_t> out(n_);
        for (std::size_t t = 0; t < n_; ++t) out[static_cast<std::size_t>((*this)(i, t) - 1)] = t;
        return out;
    }

    std::vector<std::vector<int>> rows() const {
        std::vector<std::vector<int>> out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i].assign(row(i).begin(), row(i).end());
        return out;
    }

    bool is_symmetric() const noexcept {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t t = i + 1; t < n_; ++t)
                if ((*this)(i, t) != (*this)(t, i)) return false;
        return true;
    }

    friend bool operator==(const RankMatrix&, const RankMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<int> r_;
};

/// Probability weights on {0, ..., n-1}.
class Distribution {
public:
    static constexpr double sum_tolerance = 1e-12;

    Distribution() = default;

    // Weights must be nonnegative and sum to 1 within sum_tolerance; they are
    // then renormalized exactly.
    explicit Distribution(std::vector<double> weights) : w_(std::move(weights)) {
        validate_and_renormalize(sum_tolerance);
    }

    // Accepts any nonnegative weights with positive total and rescales.
    static Distribution normalized(std::vector<double> weights) {
        Distribution d;
        d.w_ = std::move(weights);
        d.validate_and_renormalize(-1.0);
        return d;
    }

    static Distribution uniform(std::size_t n) { return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

    static Distribution point_mass(std::size_t n, std::size_t s) {
        std::vector<double> w(n, 0.0);
        w.at(s) = 1.0;
        return Distribution(std::move(w));
    }

    static Distribution two_point(std::size_t n, std::size_t s1, std::size_t s2) {
        if (s1 == s2) throw InvalidInput("two-point distribution needs distinct points");
        std::vector<double> w(n, 0.0);
        w.at(s1) = 0.5;
        w.at(s2) = 0.5;
        return Distribution(std::move(w));
    }

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t i) const noexcept { return w_[i]; }
    const std::vector<double>& weights() const noexcept { return w_; }

    std::size_t support_size(double threshold = 0.0) const noexcept {
        return static_cast<std::size_t>(std::count_if(w_.begin(), w_.end(), [&](double v) { return v > threshold; }));
    }

    Eigen::RowVectorXd row_vector() const {
        return Eigen::Map<const Eigen::RowVectorXd>(w_.data(), static_cast<Eigen::Index>(w_.size()));
    }

private:
    void validate_and_renormalize(double tolerance) {
        if (w_.empty()) throw InvalidInput("distribution must have at least one weight");
        long double total = 0.0L;
        for (double v : w_) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("distribution weights must be finite and nonnegative");
            total += v;
        }
        if (!(total > 0.0L)) throw InvalidInput("distribution weights sum to zero");
        if (tolerance >= 0.0 && std::abs(static_cast<double>(total) - 1.0) > tolerance)
            throw InvalidInput("distribution weights sum to " + std::to_string(static_cast<double>(total)) + ", not 1");
        for (double& v : w_) v = static_cast<double>(v / total);
    }

    std::vector<double> w_;
};

inline double l1_distance(const Distribution& a, const Distribution& b) {
    if (a.size() != b.size()) throw InvalidInput("l1_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

inline double linf_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidInput("linf_distance: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Row-stochastic transition matrix on a finite space.
class KernelMatrix {
public:
    static constexpr double row_tolerance = 1e-12;

    KernelMatrix() = default;

    explicit KernelMatrix(Eigen::MatrixXd k, double tolerance = row_tolerance) : k_(std::move(k)) {
        if (k_.rows() != k_.cols() || k_.rows() == 0) throw InvalidInput("kernel matrix must be square and nonempty");
        for (Eigen::Index i = 0; i < k_.rows(); ++i) {
            for (Eigen::Index t = 0; t < k_.cols(); ++t)
                if (!(k_(i, t) >= 0.0)) throw InvalidInput("kernel matrix has a negative or NaN entry in row " + std::to_string(i));
            if (std::abs(k_.row(i).sum() - 1.0) > tolerance)
                throw InvalidInput("kernel matrix row " + std::to_string(i) + " does not sum to 1");
        }
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(k_.rows()); }
    double operator()(std::size_t i, std::size_t t) const noexcept {
        return k_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    }
    const Eigen::MatrixXd& matrix() const noexcept { return k_; }

private:
    Eigen::MatrixXd k_;
};

}  // namespace jkmap
