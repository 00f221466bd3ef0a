#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "qms/linalg.hpp"

using namespace qms;

namespace {

Matrix pauli_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Matrix pauli_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

}  // namespace

TEST_CASE("kron ordering matches leftmost-slowest convention") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 0, 0, 2;
    b << 3, 0, 0, 4;
    Matrix k = kron(a, b);
    CHECK(k(0, 0) == Complex(3));
    CHECK(k(1, 1) == Complex(4));
    CHECK(k(2, 2) == Complex(6));
    CHECK(k(3, 3) == Complex(8));
}

TEST_CASE("partial traces") {
    Rng rng(7);
    Matrix a = random_hermitian(3, rng);
    Matrix b = random_hermitian(4, rng);
    Matrix ab = kron(a, b);
    Matrix ta = partial_trace_last(ab, 3, 4);
    CHECK(frobenius(ta - b.trace() * a) < 1e-12);
    Matrix tb = partial_trace_first(ab, 3, 4);
    CHECK(frobenius(tb - a.trace() * b) < 1e-12);
}

TEST_CASE("deterministic hermitian eigendecomposition") {
    Rng rng(11);
    Matrix a = random_hermitian(5, rng);
    HermEig e1 = hermitian_eig(a);
    HermEig e2 = hermitian_eig(a);
    CHECK(frobenius(e1.vectors - e2.vectors) == 0.0);
    Matrix residual = e1.vectors.adjoint() * a * e1.vectors;
    residual -= Matrix(e1.values.cast<Complex>().asDiagonal());
    CHECK(frobenius(residual) < 1e-12);

    // degenerate case: identity block plus distinct eigenvalue
    Matrix d = Matrix::Zero(3, 3);
    d(0, 0) = 1.0;
    d(1, 1) = 1.0;
    d(2, 2) = 2.0;
    HermEig ed = hermitian_eig(d);
    CHECK(frobenius(ed.vectors - identity(3)) < 1e-12);
}

TEST_CASE("matrix exp and log") {
    CHECK(frobenius(matrix_exp_hermitian(Matrix::Zero(3, 3)) - identity(3)) < 1e-14);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = std::exp(1.0);
    d(1, 1) = std::exp(2.0);
    Matrix lg = matrix_log_positive(d);
    CHECK(std::abs(lg(0, 0) - Complex(1.0)) < 1e-12);
    CHECK(std::abs(lg(1, 1) - Complex(2.0)) < 1e-12);

    Rng rng(3);
    Matrix h = random_hermitian(4, rng);
    Matrix rho = matrix_exp_hermitian(h);
    CHECK(frobenius(matrix_exp_hermitian(matrix_log_positive(rho)) - rho) <
          1e-10 * frobenius(rho));

    CHECK_THROWS_AS(matrix_log_positive(-identity(2)), std::domain_error);
}

TEST_CASE("simultaneous diagonalization of a commuting family") {
    SUBCASE("tensor Pauli-z pair") {
        Matrix a = kron(pauli_z(), identity(2));
        Matrix b = kron(identity(2), pauli_z());
        SimDiag sd = simultaneous_diagonalization({a, b});
        // joint basis is the standard one up to eigenvalue ordering
        for (int c = 0; c < 4; ++c) {
            int nonzero = 0;
            for (int r = 0; r < 4; ++r)
                if (std::abs(sd.basis(r, c)) > 1e-12) ++nonzero;
            CHECK(nonzero == 1);
        }
        std::set<std::pair<int, int>> pairs;
        for (int c = 0; c < 4; ++c)
            pairs.insert({int(std::lround(sd.eigenvalues[0](c))),
                          int(std::lround(sd.eigenvalues[1](c)))});
        CHECK(pairs == std::set<std::pair<int, int>>{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}});
    }

    SUBCASE("single operator reduces to its eigendecomposition") {
        Rng rng(5);
        Matrix a = random_hermitian(4, rng);
        SimDiag sd = simultaneous_diagonalization({a});
        HermEig e = hermitian_eig(a);
        CHECK(frobenius(Matrix(sd.basis.adjoint() * a * sd.basis) -
                        Matrix(e.values.cast<Complex>().asDiagonal())) < 1e-9);
    }

    SUBCASE("functional calculus: A and A^2 share the refined basis") {
        Rng rng(9);
        Matrix a = random_hermitian(4, rng);
        Matrix a2 = a * a;
        SimDiag sd = simultaneous_diagonalization({a, a2});
        for (int i = 0; i < 4; ++i)
            CHECK(sd.eigenvalues[1](i) ==
                  doctest::Approx(sd.eigenvalues[0](i) * sd.eigenvalues[0](i)).epsilon(1e-9));
    }

    SUBCASE("non-commuting inputs are rejected") {
        CHECK_THROWS(simultaneous_diagonalization({pauli_z(), pauli_x()}));
    }

    SUBCASE("non-Hermitian inputs are rejected") {
        Matrix m(2, 2);
        m << 0, 1, 0, 0;
        CHECK_THROWS(simultaneous_diagonalization({m}));
    }

    SUBCASE("eigenvalue multisets survive the joint rotation") {
        Rng rng(13);
        Matrix u = random_unitary(6, rng);
        Eigen::VectorXd v1(6), v2(6);
        v1 << 1, 1, 2, 2, 3, 3;
        v2 << 5, 4, 5, 4, 5, 4;
        Matrix a = u * v1.cast<Complex>().asDiagonal() * u.adjoint();
        Matrix b = u * v2.cast<Complex>().asDiagonal() * u.adjoint();
        SimDiag sd = simultaneous_diagonalization({a, b});
        std::vector<double> got(sd.eigenvalues[0].data(), sd.eigenvalues[0].data() + 6);
        std::sort(got.begin(), got.end());
        std::vector<double> want{1, 1, 2, 2, 3, 3};
        for (int i = 0; i < 6; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
    }
}

TEST_CASE("random unitary is unitary and seeded") {
    Rng a(42), b(42);
    Matrix u = random_unitary(5, a);
    Matrix v = random_unitary(5, b);
    CHECK(frobenius(u - v) == 0.0);
    CHECK(frobenius(Matrix(u.adjoint() * u) - identity(5)) < 1e-12);
}
