#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "qms/types.hpp"

namespace qms {

Matrix kron(const Matrix& a, const Matrix& b);
Matrix kron_all(const std::vector<Matrix>& factors);

inline Matrix identity(int n) { return Matrix::Identity(n, n); }

double frobenius(const Matrix& a);
bool is_hermitian(const Matrix& a, double rel_tol);
double commutator_norm(const Matrix& a, const Matrix& b);

// Trace over the trailing tensor factor of a (d_keep * d_drop) square matrix.
Matrix partial_trace_last(const Matrix& m, int d_keep, int d_drop);
// Trace over the leading factor.
Matrix partial_trace_first(const Matrix& m, int d_drop, int d_keep);

struct HermEig {
    RealVector values;  // ascending
    Matrix vectors;     // columns aligned with values
};

// Hermitian eigendecomposition with a reproducible basis: eigenvalues ascend,
// degenerate clusters (gap below cluster_tol * scale) get the orthonormalization
// of projected standard basis vectors in index order, and every column's phase
// is pinned by its largest-magnitude entry.
HermEig hermitian_eig(const Matrix& a, double cluster_tol = 1e-9);

Matrix matrix_exp_hermitian(const Matrix& a);
Matrix matrix_log_positive(const Matrix& a, double min_eig = 1e-14);

struct SimDiag {
    Matrix basis;                          // joint unitary
    std::vector<RealVector> eigenvalues;   // one list per input, aligned with columns
};

// Joint diagonalization of a commuting Hermitian family by sequential
// eigenspace refinement. Throws if inputs fail the Hermiticity or
// commutation preconditions.
SimDiag simultaneous_diagonalization(const std::vector<Matrix>& ops,
                                     const Tolerances& tol = Tolerances::defaults());

// Deterministic sampling helpers: all randomness in the library flows through
// these so byte-identical replays only need the seed.
struct Rng {
    std::mt19937_64 engine;
    explicit Rng(std::uint64_t seed) : engine(seed) {}

    std::uint64_t next_u64() { return engine(); }
    double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int n) {  // [0, n)
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }
    double gaussian();
    Complex gaussian_complex() { return Complex(gaussian(), gaussian()); }
};

Matrix random_unitary(int n, Rng& rng);
Matrix random_hermitian(int n, Rng& rng);

}  // namespace qms
