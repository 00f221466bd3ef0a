#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qms/markov.hpp"

namespace qms {

// Two-periodic spin-1/2 chain with alternating diagonal couplings: the bond
// term between sites j and j+1 is diag(J, -J, -J, J) with J = j1 on even bonds
// and j2 on odd ones. Exact eigenvalue bookkeeping is attached when both
// couplings are rational.
InteractionSpec gen_ising(double j1, double j2);
InteractionSpec gen_ising_exact(const Rational& j1, const Rational& j2);

// Diagonal lifting of the classical chain with transition matrix p: bond
// eigenvalues -ln p(i, j) on one-dimensional sectors. Rows must be strictly
// positive, sum to one, and the entries must not all coincide.
InteractionSpec gen_markov_lifting(const std::vector<std::vector<double>>& p,
                                   const Tolerances& tol = Tolerances::defaults());

enum class EigenvaluePool {
    Ln2,        // small rationals times ln 2 (exact bookkeeping attached)
    Mixed,      // small rationals times ln 2 and ln 3
};

struct RandomSpecParams {
    std::uint64_t seed = 1;
    int period = 0;                      // 0: sample from {1, 2}
    std::vector<int> site_dims;          // empty: sample dims in [2, max_site_dim]
    int max_site_dim = 4;
    bool lifting = false;                // rotate bond/site bases and site embeddings
    EigenvaluePool pool = EigenvaluePool::Mixed;
    bool nontrivial_sectors = true;      // allow sectors with n or nbar > 1
};

// Seeded periodic spec with random sector partitions and random commuting
// blocks. The same seed with lifting on/off draws identical eigenvalue data,
// so the two specs differ only by local basis rotations.
InteractionSpec gen_random(const RandomSpecParams& params);

}  // namespace qms
