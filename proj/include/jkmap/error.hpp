#pragma once

#include <stdexcept>
#include <string>

namespace jkmap {

// Bad input: malformed matrix, out-of-domain point, invalid (j,k), bad config.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// A rank row contains two equal distances. Carries the row and the tied pair.
class TieError : public InvalidInput {
public:
    TieError(std::size_t row, std::size_t a, std::size_t b)
        : InvalidInput("distance tie in row " + std::to_string(row) + " between columns " +
                       std::to_string(a) + " and " + std::to_string(b)),
          row_(row), a_(a), b_(b) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t first() const noexcept { return a_; }
    std::size_t second() const noexcept { return b_; }

private:
    std::size_t row_, a_, b_;
};

// Numerical failure: non-convergence, exceeded enumeration budget.
class ComputationError : public std::runtime_error {
public:
    explicit ComputationError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace jkmap
