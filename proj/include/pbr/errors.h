#pragma once

#include <stdexcept>
#include <string>

namespace pbr {

// Malformed input: wrong shapes, non-finite values, empty vectors.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// A parameter lies outside the set where the operation is defined.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// The market model or a covariance matrix is unusable (not PD, singular).
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Quadrature, root finding or a factorization did not converge.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Rank-deficient problem data (e.g. mean vector proportional to 1).
class DegenerateError : public std::runtime_error {
public:
    explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

// The requested target cannot be met by any portfolio.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Penalty-ratio selection found no grid point feasible on every fold.
class SelectionError : public std::runtime_error {
public:
    explicit SelectionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pbr
