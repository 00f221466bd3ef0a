#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qms/algebra.hpp"

using namespace qms;

namespace {

AlgebraElement random_element(const DirectSumAlgebra& a, Rng& rng, bool hermitian = false) {
    AlgebraElement x{a, {}};
    for (const auto& b : a.blocks) {
        Matrix m(b.dim, b.dim);
        for (int i = 0; i < b.dim; ++i)
            for (int j = 0; j < b.dim; ++j) m(i, j) = rng.gaussian_complex();
        if (hermitian) m = (m + m.adjoint()) * 0.5;
        x.blocks.push_back(m);
    }
    return x;
}

AlgebraElement random_density(const DirectSumAlgebra& a, Rng& rng) {
    AlgebraElement x = random_element(a, rng);
    AlgebraElement pos = x * x.adjoint();
    Complex tr = canonical_trace(pos);
    return pos.scaled(1.0 / tr);
}

// Matrix-unit spanning set of the embedded subalgebra, as dense sup matrices.
std::vector<Matrix> embedded_basis(const InclusionDescriptor& inc) {
    std::vector<Matrix> basis;
    for (size_t j = 0; j < inc.sub.blocks.size(); ++j) {
        int d = inc.sub.blocks[j].dim;
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                AlgebraElement e = AlgebraElement::zero(inc.sub);
                e.blocks[j](r, c) = 1.0;
                basis.push_back(inc.embed(e).dense());
            }
    }
    return basis;
}

// Least-squares projection of y onto span(basis) in the trace inner product.
Matrix orthogonal_projection_oracle(const Matrix& y, const std::vector<Matrix>& basis) {
    const int n = static_cast<int>(basis.size());
    Matrix gram(n, n);
    Vector rhs(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) gram(i, j) = (basis[i].adjoint() * basis[j]).trace();
        rhs(i) = (basis[i].adjoint() * y).trace();
    }
    Vector coeff = gram.fullPivLu().solve(rhs);
    Matrix out = Matrix::Zero(y.rows(), y.cols());
    for (int i = 0; i < n; ++i) out += coeff(i) * basis[i];
    return out;
}

// Solves Tr_sub(z w) = Tr_sup(y embed(w)) for z over the matrix-unit basis.
AlgebraElement pairing_solve_oracle(const AlgebraElement& y, const InclusionDescriptor& inc) {
    AlgebraElement z = AlgebraElement::zero(inc.sub);
    for (size_t j = 0; j < inc.sub.blocks.size(); ++j) {
        int d = inc.sub.blocks[j].dim;
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                AlgebraElement w = AlgebraElement::zero(inc.sub);
                w.blocks[j](r, c) = 1.0;
                // Tr(z e_rc) = z(c, r)
                z.blocks[j](c, r) = canonical_trace(y * inc.embed(w));
            }
    }
    return z;
}

}  // namespace

TEST_CASE("canonical trace counts minimal projections") {
    DirectSumAlgebra m2 = full_matrix_algebra(2);
    CHECK(canonical_trace(AlgebraElement::identity_element(m2)) == Complex(2.0));

    DirectSumAlgebra m23;
    m23.blocks = {{"a", 2}, {"b", 3}};
    CHECK(canonical_trace(AlgebraElement::identity_element(m23)) == Complex(5.0));

    AlgebraElement p = AlgebraElement::zero(m2);
    p.blocks[0](0, 0) = 1.0;
    CHECK(canonical_trace(p) == Complex(1.0));

    AlgebraElement mismatched{m2, {Matrix::Zero(3, 3)}};
    CHECK_THROWS(canonical_trace(mismatched));
}

TEST_CASE("trace-compatible expectation of standard inclusions") {
    SUBCASE("scalars in M2: value forced by trace preservation") {
        auto inc = inclusion_scalars(2);
        auto e = trace_preserving_expectation(inc);
        AlgebraElement x = AlgebraElement::zero(inc.sup);
        x.blocks[0] << 1, 0, 0, 0;
        AlgebraElement r = e.apply(x);
        CHECK(std::abs(r.blocks[0](0, 0) - Complex(1.0)) < 1e-14);
    }

    SUBCASE("tensor factor: a (x) b -> a Tr(b)") {
        auto inc = inclusion_tensor_left(2, 3);
        auto e = trace_preserving_expectation(inc);
        Rng rng(21);
        Matrix a = random_hermitian(2, rng);
        Matrix b = random_hermitian(3, rng);
        AlgebraElement x{inc.sup, {kron(a, b)}};
        AlgebraElement r = e.apply(x);
        CHECK(frobenius(r.blocks[0] - b.trace() * a) < 1e-12);
    }

    SUBCASE("repeated block: x1 (+) x2 -> x1 + x2, matches the pairing oracle") {
        auto inc = inclusion_repeated_block(2, 2);
        auto e = trace_preserving_expectation(inc);
        Rng rng(22);
        Matrix x1 = random_hermitian(2, rng);
        Matrix x2 = random_hermitian(2, rng);
        Matrix dense = Matrix::Zero(4, 4);
        dense.block(0, 0, 2, 2) = x1;
        dense.block(2, 2, 2, 2) = x2;
        AlgebraElement x{inc.sup, {dense}};
        AlgebraElement r = e.apply(x);
        CHECK(frobenius(r.blocks[0] - (x1 + x2)) < 1e-12);
        AlgebraElement oracle = pairing_solve_oracle(x, inc);
        CHECK((r - oracle).norm() < 1e-12);
    }
}

TEST_CASE("expectation invariants on random inclusions") {
    Rng rng(31);
    std::vector<InclusionDescriptor> incs = {inclusion_scalars(3),
                                             inclusion_tensor_left(2, 2),
                                             inclusion_repeated_block(2, 3)};
    for (auto& inc : incs) {
        auto e = trace_preserving_expectation(inc);
        AlgebraElement y = random_element(inc.sup, rng);

        // trace preservation
        CHECK(std::abs(canonical_trace(e.apply(y)) - canonical_trace(y)) < 1e-10);

        // pairing identity against the linear-solve oracle
        CHECK((e.apply(y) - pairing_solve_oracle(y, inc)).norm() < 1e-10);

        // bimodule property over the subalgebra
        AlgebraElement a = random_element(inc.sub, rng);
        AlgebraElement b = random_element(inc.sub, rng);
        AlgebraElement lhs = e.apply(inc.embed(a) * y * inc.embed(b));
        AlgebraElement rhs = a * e.apply(y) * b;
        CHECK((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));

        // induced projection is idempotent and matches the least-squares oracle
        AlgebraElement p1 = e.subalgebra_projection(y);
        AlgebraElement p2 = e.subalgebra_projection(p1);
        CHECK((p1 - p2).norm() < 1e-10 * (1.0 + p1.norm()));
        Matrix oracle = orthogonal_projection_oracle(y.dense(), embedded_basis(inc));
        CHECK(frobenius(p1.dense() - oracle) < 1e-9 * (1.0 + frobenius(oracle)));

        // positivity on a positive element
        AlgebraElement rho = random_density(inc.sup, rng);
        AlgebraElement r = e.apply(rho);
        for (const auto& blk : r.blocks)
            CHECK(hermitian_eig(blk).values.minCoeff() > -1e-12);
    }
}

TEST_CASE("restrict_density") {
    SUBCASE("product density restricts to its left marginal") {
        auto inc = inclusion_tensor_left(2, 2);
        Rng rng(41);
        AlgebraElement rho = random_density(full_matrix_algebra(2), rng);
        AlgebraElement sigma = random_density(full_matrix_algebra(2), rng);
        AlgebraElement joint{inc.sup, {kron(rho.blocks[0], sigma.blocks[0])}};
        AlgebraElement r = restrict_density(joint, inc);
        CHECK(frobenius(r.blocks[0] - sigma.blocks[0].trace() * rho.blocks[0]) < 1e-12);
    }

    SUBCASE("maximally mixed density keeps its functional values") {
        auto inc = inclusion_scalars(2);
        AlgebraElement mixed{inc.sup, {0.5 * identity(2)}};
        AlgebraElement r = restrict_density(mixed, inc);
        CHECK(std::abs(canonical_trace(r * AlgebraElement::identity_element(inc.sub)) -
                       Complex(1.0)) < 1e-12);
    }

    SUBCASE("random positive density matches the dual-pairing solve") {
        auto inc = inclusion_tensor_left(2, 2);
        Rng rng(43);
        AlgebraElement t = random_density(inc.sup, rng);
        AlgebraElement r = restrict_density(t, inc);
        AlgebraElement oracle = pairing_solve_oracle(t, inc);
        CHECK((r - oracle).norm() < 1e-12);
        for (int rep = 0; rep < 5; ++rep) {
            AlgebraElement y = random_element(inc.sub, rng);
            Complex lhs = canonical_trace(r * y);
            Complex rhs = canonical_trace(t * inc.embed(y));
            CHECK(std::abs(lhs - rhs) < 1e-12 * (1.0 + std::abs(rhs)));
        }
    }

    SUBCASE("non-positive input is rejected") {
        auto inc = inclusion_scalars(2);
        AlgebraElement neg{inc.sup, {-identity(2)}};
        CHECK_THROWS_AS(restrict_density(neg, inc), std::domain_error);
    }
}

TEST_CASE("pinching expectation") {
    DirectSumAlgebra m2 = full_matrix_algebra(2);
    AlgebraElement p0 = AlgebraElement::zero(m2);
    AlgebraElement p1 = AlgebraElement::zero(m2);
    p0.blocks[0](0, 0) = 1.0;
    p1.blocks[0](1, 1) = 1.0;

    AlgebraElement x = AlgebraElement::zero(m2);
    x.blocks[0] << Complex(1), Complex(5), Complex(7), Complex(2);
    AlgebraElement r = pinching_expectation(x, {p0, p1});
    CHECK(std::abs(r.blocks[0](0, 0) - Complex(1.0)) < 1e-14);
    CHECK(std::abs(r.blocks[0](1, 1) - Complex(2.0)) < 1e-14);
    CHECK(std::abs(r.blocks[0](0, 1)) < 1e-14);

    // fixed point when x commutes with every projection
    AlgebraElement diag = AlgebraElement::zero(m2);
    diag.blocks[0] << 3, 0, 0, 4;
    CHECK((pinching_expectation(diag, {p0, p1}) - diag).norm() < 1e-14);

    SUBCASE("random projections against the sum-of-products oracle") {
        Rng rng(51);
        DirectSumAlgebra m4 = full_matrix_algebra(4);
        Matrix u = random_unitary(4, rng);
        Matrix d0 = Matrix::Zero(4, 4), d1 = Matrix::Zero(4, 4);
        d0(0, 0) = d0(1, 1) = 1.0;
        d1(2, 2) = d1(3, 3) = 1.0;
        AlgebraElement q0{m4, {u * d0 * u.adjoint()}};
        AlgebraElement q1{m4, {u * d1 * u.adjoint()}};
        AlgebraElement y = random_element(m4, rng);
        AlgebraElement got = pinching_expectation(y, {q0, q1});
        Matrix want = q0.blocks[0] * y.blocks[0] * q0.blocks[0] +
                      q1.blocks[0] * y.blocks[0] * q1.blocks[0];
        CHECK(frobenius(got.blocks[0] - want) < 1e-12);

        // trace preserved, conditional expectation over its range
        CHECK(std::abs(canonical_trace(got) - canonical_trace(y)) < 1e-12);
        AlgebraElement a = q0.scaled(2.0) + q1.scaled(-1.0);
        AlgebraElement lhs = pinching_expectation(a * y * a, {q0, q1});
        AlgebraElement rhs = a * got * a;
        CHECK((lhs - rhs).norm() < 1e-10);
    }

    SUBCASE("incomplete or non-orthogonal projections are rejected") {
        CHECK_THROWS(pinching_expectation(x, {p0}));
        AlgebraElement skew = AlgebraElement::zero(m2);
        skew.blocks[0] << 0.5, 0.5, 0.5, 0.5;
        CHECK_THROWS(pinching_expectation(x, {p0, skew}));
    }
}

TEST_CASE("diagonal expectation in a rotated basis") {
    DirectSumAlgebra m2 = full_matrix_algebra(2);
    AlgebraElement x = AlgebraElement::zero(m2);
    x.blocks[0] << Complex(1), Complex(5), Complex(7), Complex(2);

    AlgebraElement r = diagonal_expectation(x, {identity(2)});
    CHECK(std::abs(r.blocks[0](0, 0) - Complex(1.0)) < 1e-14);
    CHECK(std::abs(r.blocks[0](1, 1) - Complex(2.0)) < 1e-14);
    CHECK(std::abs(r.blocks[0](1, 0)) < 1e-14);

    AlgebraElement d = AlgebraElement::zero(m2);
    d.blocks[0] << 3, 0, 0, -1;
    CHECK((diagonal_expectation(d, {identity(2)}) - d).norm() < 1e-14);

    // Hadamard basis kills sigma_z entirely
    Matrix had(2, 2);
    had << 1, 1, 1, -1;
    had /= std::sqrt(2.0);
    AlgebraElement z = AlgebraElement::zero(m2);
    z.blocks[0] << 1, 0, 0, -1;
    CHECK(diagonal_expectation(z, {had}).norm() < 1e-14);

    Matrix bad(2, 2);
    bad << 1, 1, 0, 1;
    CHECK_THROWS(diagonal_expectation(x, {bad}));
}

TEST_CASE("blockwise joint diagonalization") {
    DirectSumAlgebra a;
    a.blocks = {{"x", 2}, {"y", 3}};
    Rng rng(71);
    Matrix u2 = random_unitary(2, rng);
    Matrix u3 = random_unitary(3, rng);
    Eigen::VectorXd e1(2), e2(3);
    e1 << -1, 1;
    e2 << 0, 1, 2;
    AlgebraElement op1{a, {u2 * e1.cast<Complex>().asDiagonal() * u2.adjoint(),
                           u3 * e2.cast<Complex>().asDiagonal() * u3.adjoint()}};
    AlgebraElement op2 = op1 * op1;
    SimDiagElements sd = simultaneous_diagonalization({op1, op2});
    for (int blk = 0; blk < 2; ++blk)
        for (int i = 0; i < sd.eigenvalues[0][blk].size(); ++i)
            CHECK(sd.eigenvalues[1][blk](i) ==
                  doctest::Approx(sd.eigenvalues[0][blk](i) * sd.eigenvalues[0][blk](i))
                      .epsilon(1e-9));
}

TEST_CASE("exp and log on elements") {
    DirectSumAlgebra a;
    a.blocks = {{"x", 2}, {"y", 3}};
    Rng rng(61);
    AlgebraElement rho = random_density(a, rng);
    AlgebraElement lg = matrix_log(rho);
    CHECK((matrix_exp(lg) - rho).norm() < 1e-10 * (1.0 + rho.norm()));
}
