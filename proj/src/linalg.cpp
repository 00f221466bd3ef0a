#include "qms/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace qms {

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Matrix kron_all(const std::vector<Matrix>& factors) {
    if (factors.empty()) return Matrix::Identity(1, 1);
    Matrix out = factors.front();
    for (size_t i = 1; i < factors.size(); ++i) out = kron(out, factors[i]);
    return out;
}

double frobenius(const Matrix& a) { return a.norm(); }

bool is_hermitian(const Matrix& a, double rel_tol) {
    if (a.rows() != a.cols()) return false;
    double scale = std::max(1.0, frobenius(a));
    return frobenius(a - a.adjoint()) <= rel_tol * scale;
}

double commutator_norm(const Matrix& a, const Matrix& b) {
    return frobenius(a * b - b * a);
}

Matrix partial_trace_last(const Matrix& m, int d_keep, int d_drop) {
    Matrix out = Matrix::Zero(d_keep, d_keep);
    for (int i = 0; i < d_keep; ++i)
        for (int j = 0; j < d_keep; ++j) {
            Complex s = 0.0;
            for (int t = 0; t < d_drop; ++t) s += m(i * d_drop + t, j * d_drop + t);
            out(i, j) = s;
        }
    return out;
}

Matrix partial_trace_first(const Matrix& m, int d_drop, int d_keep) {
    Matrix out = Matrix::Zero(d_keep, d_keep);
    for (int i = 0; i < d_keep; ++i)
        for (int j = 0; j < d_keep; ++j) {
            Complex s = 0.0;
            for (int t = 0; t < d_drop; ++t) s += m(t * d_keep + i, t * d_keep + j);
            out(i, j) = s;
        }
    return out;
}

namespace {

void pin_phase(Eigen::Ref<Vector> v) {
    Eigen::Index best = 0;
    double mag = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double m = std::abs(v(i));
        if (m > mag + 1e-12) {
            mag = m;
            best = i;
        }
    }
    if (mag > 0.0) v *= std::conj(v(best)) / mag;
}

// Orthonormal basis of the span of the columns of P (a projector), built from
// projected standard basis vectors taken in index order.
Matrix canonical_cluster_basis(const Matrix& projector, int rank) {
    const Eigen::Index n = projector.rows();
    Matrix basis(n, rank);
    int got = 0;
    for (Eigen::Index i = 0; i < n && got < rank; ++i) {
        Vector w = projector.col(i);
        for (int c = 0; c < got; ++c) w -= basis.col(c).dot(w) * basis.col(c);
        double nrm = w.norm();
        if (nrm > 1e-7) {
            w /= nrm;
            // second Gram-Schmidt pass for orthogonality at machine precision
            for (int c = 0; c < got; ++c) w -= basis.col(c).dot(w) * basis.col(c);
            w.normalize();
            pin_phase(w);
            basis.col(got++) = w;
        }
    }
    if (got != rank) throw std::runtime_error("cluster basis construction failed");
    return basis;
}

}  // namespace

HermEig hermitian_eig(const Matrix& a, double cluster_tol) {
    if (a.rows() != a.cols()) throw std::invalid_argument("hermitian_eig: not square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver((a + a.adjoint()) * 0.5);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eig: solver failed");
    HermEig out{solver.eigenvalues(), solver.eigenvectors()};

    const Eigen::Index n = out.values.size();
    double scale = std::max(1.0, std::max(std::abs(out.values(0)),
                                          std::abs(out.values(n - 1))));
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i + 1;
        while (j < n && out.values(j) - out.values(j - 1) < cluster_tol * scale) ++j;
        const int rank = static_cast<int>(j - i);
        if (rank == 1) {
            Vector v = out.vectors.col(i);
            pin_phase(v);
            out.vectors.col(i) = v;
        } else {
            Matrix q = out.vectors.block(0, i, n, rank);
            Matrix projector = q * q.adjoint();
            out.vectors.block(0, i, n, rank) = canonical_cluster_basis(projector, rank);
        }
        i = j;
    }
    return out;
}

Matrix matrix_exp_hermitian(const Matrix& a) {
    HermEig e = hermitian_eig(a);
    return e.vectors * e.values.array().exp().matrix().asDiagonal() *
           e.vectors.adjoint();
}

Matrix matrix_log_positive(const Matrix& a, double min_eig) {
    HermEig e = hermitian_eig(a);
    if (e.values.minCoeff() <= min_eig)
        throw std::domain_error("matrix_log: operator is not strictly positive");
    return e.vectors * e.values.array().log().matrix().asDiagonal() *
           e.vectors.adjoint();
}

SimDiag simultaneous_diagonalization(const std::vector<Matrix>& ops,
                                     const Tolerances& tol) {
    if (ops.empty()) throw std::invalid_argument("simultaneous_diagonalization: no input");
    const Eigen::Index n = ops.front().rows();
    for (const auto& a : ops) {
        if (a.rows() != n || a.cols() != n)
            throw std::invalid_argument("simultaneous_diagonalization: shape mismatch");
        if (!is_hermitian(a, tol.hermitian * 10))
            throw std::invalid_argument("simultaneous_diagonalization: non-Hermitian input");
    }
    for (size_t p = 0; p < ops.size(); ++p)
        for (size_t q = p + 1; q < ops.size(); ++q) {
            double bound = tol.simdiag_commute *
                           std::max(1.0, frobenius(ops[p]) * frobenius(ops[q]));
            if (commutator_norm(ops[p], ops[q]) > bound)
                throw std::invalid_argument("simultaneous_diagonalization: inputs do not commute");
        }

    // Refine eigenspaces one operator at a time; cluster order keeps the final
    // column order lexicographic in the eigenvalue tuples.
    std::vector<Matrix> clusters{Matrix::Identity(n, n)};
    for (const auto& a : ops) {
        std::vector<Matrix> next;
        for (const auto& q : clusters) {
            Matrix compressed = q.adjoint() * a * q;
            HermEig e = hermitian_eig(compressed, tol.eig_cluster);
            const Eigen::Index r = e.values.size();
            double scale = std::max(1.0, std::max(std::abs(e.values(0)),
                                                  std::abs(e.values(r - 1))));
            Eigen::Index i = 0;
            while (i < r) {
                Eigen::Index j = i + 1;
                while (j < r && e.values(j) - e.values(j - 1) < tol.eig_cluster * scale) ++j;
                next.push_back(q * e.vectors.block(0, i, r, j - i));
                i = j;
            }
        }
        clusters = std::move(next);
    }

    SimDiag out;
    out.basis = Matrix(n, n);
    Eigen::Index col = 0;
    for (const auto& q : clusters) {
        const int rank = static_cast<int>(q.cols());
        Matrix projector = q * q.adjoint();
        out.basis.block(0, col, n, rank) = canonical_cluster_basis(projector, rank);
        col += rank;
    }

    out.eigenvalues.reserve(ops.size());
    for (const auto& a : ops) {
        Matrix rotated = out.basis.adjoint() * a * out.basis;
        RealVector diag(n);
        for (Eigen::Index i = 0; i < n; ++i) diag(i) = rotated(i, i).real();
        double scale = std::max(1.0, frobenius(a));
        Matrix off = rotated;
        off.diagonal().setZero();
        if (frobenius(off) > tol.simdiag_residual * scale)
            throw std::runtime_error("simultaneous_diagonalization: residual too large");
        out.eigenvalues.push_back(std::move(diag));
    }
    return out;
}

double Rng::gaussian() {
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 1e-300);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Matrix random_unitary(int n, Rng& rng) {
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = rng.gaussian_complex();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i) {
        Complex d = r(i, i);
        double m = std::abs(d);
        q.col(i) *= (m > 0) ? d / m : Complex(1.0, 0.0);
    }
    return q;
}

Matrix random_hermitian(int n, Rng& rng) {
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = rng.gaussian_complex();
    return (g + g.adjoint()) * 0.5;
}

}  // namespace qms
