#pragma once

// Gaussian Markov random field algebra for the random-walk year prior.
//
// Precisions are symmetric tridiagonal; every operation is O(n).

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "batrank/rng.hpp"

namespace batrank {

struct TridiagPrecision {
    std::vector<double> diag;
    std::vector<double> offdiag;  // size n-1, entry i couples i and i+1

    std::size_t size() const { return diag.size(); }

    TridiagPrecision scaled(double c) const;
    TridiagPrecision& add_diagonal(std::span<const double> c);
    // y = A v
    std::vector<double> multiply(std::span<const double> v) const;
};

class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structure matrix of the backwards random walk with the last effect pinned:
// diag (1, 2, ..., 2), off-diagonals -1. Throws std::invalid_argument for n == 0.
TridiagPrecision build_q(std::size_t n);

// v' A v
double quad_form(const TridiagPrecision& a, std::span<const double> v);

// Lower-bidiagonal Cholesky factor A = L L'.
struct BidiagFactor {
    std::vector<double> diag;     // L(i, i)
    std::vector<double> subdiag;  // L(i+1, i)

    std::size_t size() const { return diag.size(); }
    double log_det() const;  // log |A| = 2 sum log L(i, i)
};

BidiagFactor chol(const TridiagPrecision& a);

// Solves (L L') x = rhs.
std::vector<double> solve(const BidiagFactor& f, std::span<const double> rhs);

// Solves L' x = z.
std::vector<double> solve_upper(const BidiagFactor& f, std::span<const double> z);

// Draw from N(mean, A^{-1}) given the factor of A.
std::vector<double> sample_mvn(std::span<const double> mean, const BidiagFactor& f, Rng& rng);

std::vector<double> sample_mvn_tridiag(std::span<const double> mean, const TridiagPrecision& precision,
                                       Rng& rng);

}  // namespace batrank
