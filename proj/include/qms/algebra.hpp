#pragma once

#include <string>
#include <vector>

#include "qms/linalg.hpp"
#include "qms/types.hpp"

namespace qms {

// Finite multi-matrix algebra: a direct sum of full matrix factors acting on
// the direct sum of their column spaces.
struct DirectSumAlgebra {
    struct Block {
        std::string label;
        int dim = 0;
    };
    std::vector<Block> blocks;

    int total_dim() const {
        int d = 0;
        for (const auto& b : blocks) d += b.dim;
        return d;
    }
    int num_blocks() const { return static_cast<int>(blocks.size()); }
    void validate() const;
};

DirectSumAlgebra full_matrix_algebra(int dim, const std::string& label = "m");

struct AlgebraElement {
    DirectSumAlgebra alg;
    std::vector<Matrix> blocks;

    static AlgebraElement zero(const DirectSumAlgebra& a);
    static AlgebraElement identity_element(const DirectSumAlgebra& a);

    void check_shape() const;
    bool hermitian(double rel_tol = 1e-12) const;
    AlgebraElement adjoint() const;
    // Block-diagonal matrix on the direct-sum space.
    Matrix dense() const;

    AlgebraElement operator+(const AlgebraElement& o) const;
    AlgebraElement operator-(const AlgebraElement& o) const;
    AlgebraElement operator*(const AlgebraElement& o) const;
    AlgebraElement scaled(Complex c) const;
    double norm() const;
};

Complex canonical_trace(const AlgebraElement& x);

// Inclusion of multi-matrix algebras. Block (i, j) of the embedding carries a
// copy of sub factor j into sup factor i with the recorded multiplicity; the
// isometry maps C^{dim_j} (x) C^{mult_ij} onto its range in C^{dim_i}.
struct InclusionDescriptor {
    DirectSumAlgebra sub;
    DirectSumAlgebra sup;
    std::vector<std::vector<int>> multiplicity;        // [sup block][sub block]
    std::vector<std::vector<Matrix>> isometries;       // empty matrix when mult = 0

    AlgebraElement embed(const AlgebraElement& x) const;
    void validate(const Tolerances& tol = Tolerances::defaults()) const;
};

// Standard inclusions used throughout the tests.
InclusionDescriptor inclusion_scalars(int dim);                   // C I in M_dim
InclusionDescriptor inclusion_tensor_left(int da, int db);        // M_a (x) I in M_a (x) M_b
InclusionDescriptor inclusion_repeated_block(int dim, int copies); // {a (+) ... (+) a} in M_{dim*copies}

// The trace-compatible positive map of the inclusion: per block pair it is
// identity tensor partial trace over the multiplicity factor, and it is the
// adjoint of the embedding under the canonical trace pairings. Composed with
// the multiplicity correction it yields the orthogonal projection onto the
// embedded subalgebra.
struct ExpectationMap {
    InclusionDescriptor inclusion;

    AlgebraElement apply(const AlgebraElement& y) const;
    // Element of sup: embedding of apply(y) rescaled by inverse multiplicities;
    // idempotent, self-adjoint in the trace inner product.
    AlgebraElement subalgebra_projection(const AlgebraElement& y) const;
    // Column multiplicity sum per sub block (central scaling of apply over embed).
    std::vector<int> column_multiplicity() const;
};

ExpectationMap trace_preserving_expectation(const InclusionDescriptor& inc);

// Density restriction along the inclusion: the sub-algebra density representing
// the same functional. Throws if the input is not positive.
AlgebraElement restrict_density(const AlgebraElement& density,
                                const InclusionDescriptor& inc,
                                const Tolerances& tol = Tolerances::defaults());

// Sum of p x p over a complete orthogonal projector family.
AlgebraElement pinching_expectation(const AlgebraElement& x,
                                    const std::vector<AlgebraElement>& projections,
                                    const Tolerances& tol = Tolerances::defaults());

// Keeps the diagonal matrix-unit coefficients in the given orthonormal basis
// (one unitary per block), zeroes the rest.
AlgebraElement diagonal_expectation(const AlgebraElement& x,
                                    const std::vector<Matrix>& masa_basis,
                                    const Tolerances& tol = Tolerances::defaults());

struct SimDiagElements {
    std::vector<Matrix> basis;                            // per block
    std::vector<std::vector<RealVector>> eigenvalues;     // [op][block]
};

SimDiagElements simultaneous_diagonalization(const std::vector<AlgebraElement>& ops,
                                             const Tolerances& tol = Tolerances::defaults());

AlgebraElement matrix_exp(const AlgebraElement& x);
AlgebraElement matrix_log(const AlgebraElement& x,
                          const Tolerances& tol = Tolerances::defaults());

}  // namespace qms
