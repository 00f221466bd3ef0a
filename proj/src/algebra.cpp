#include "qms/algebra.hpp"

#include <set>
#include <stdexcept>

namespace qms {

void DirectSumAlgebra::validate() const {
    if (blocks.empty()) throw std::invalid_argument("algebra has no blocks");
    std::set<std::string> seen;
    for (const auto& b : blocks) {
        if (b.dim <= 0) throw std::invalid_argument("non-positive block dimension");
        if (!seen.insert(b.label).second)
            throw std::invalid_argument("duplicate central label: " + b.label);
    }
}

DirectSumAlgebra full_matrix_algebra(int dim, const std::string& label) {
    DirectSumAlgebra a;
    a.blocks.push_back({label, dim});
    return a;
}

AlgebraElement AlgebraElement::zero(const DirectSumAlgebra& a) {
    AlgebraElement x{a, {}};
    for (const auto& b : a.blocks) x.blocks.push_back(Matrix::Zero(b.dim, b.dim));
    return x;
}

AlgebraElement AlgebraElement::identity_element(const DirectSumAlgebra& a) {
    AlgebraElement x{a, {}};
    for (const auto& b : a.blocks) x.blocks.push_back(Matrix::Identity(b.dim, b.dim));
    return x;
}

void AlgebraElement::check_shape() const {
    if (blocks.size() != alg.blocks.size())
        throw std::invalid_argument("element/algebra block count mismatch");
    for (size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].rows() != alg.blocks[i].dim || blocks[i].cols() != alg.blocks[i].dim)
            throw std::invalid_argument("element block shape mismatch at " +
                                        alg.blocks[i].label);
}

bool AlgebraElement::hermitian(double rel_tol) const {
    for (const auto& b : blocks)
        if (!is_hermitian(b, rel_tol)) return false;
    return true;
}

AlgebraElement AlgebraElement::adjoint() const {
    AlgebraElement out{alg, {}};
    for (const auto& b : blocks) out.blocks.push_back(b.adjoint());
    return out;
}

Matrix AlgebraElement::dense() const {
    int n = alg.total_dim();
    Matrix out = Matrix::Zero(n, n);
    int off = 0;
    for (size_t i = 0; i < blocks.size(); ++i) {
        int d = alg.blocks[i].dim;
        out.block(off, off, d, d) = blocks[i];
        off += d;
    }
    return out;
}

AlgebraElement AlgebraElement::operator+(const AlgebraElement& o) const {
    AlgebraElement out{alg, {}};
    for (size_t i = 0; i < blocks.size(); ++i) out.blocks.push_back(blocks[i] + o.blocks[i]);
    return out;
}

AlgebraElement AlgebraElement::operator-(const AlgebraElement& o) const {
    AlgebraElement out{alg, {}};
    for (size_t i = 0; i < blocks.size(); ++i) out.blocks.push_back(blocks[i] - o.blocks[i]);
    return out;
}

AlgebraElement AlgebraElement::operator*(const AlgebraElement& o) const {
    AlgebraElement out{alg, {}};
    for (size_t i = 0; i < blocks.size(); ++i) out.blocks.push_back(blocks[i] * o.blocks[i]);
    return out;
}

AlgebraElement AlgebraElement::scaled(Complex c) const {
    AlgebraElement out{alg, {}};
    for (const auto& b : blocks) out.blocks.push_back(c * b);
    return out;
}

double AlgebraElement::norm() const {
    double s = 0.0;
    for (const auto& b : blocks) s += b.squaredNorm();
    return std::sqrt(s);
}

Complex canonical_trace(const AlgebraElement& x) {
    x.check_shape();
    Complex t = 0.0;
    for (const auto& b : x.blocks) t += b.trace();
    return t;
}

AlgebraElement InclusionDescriptor::embed(const AlgebraElement& x) const {
    x.check_shape();
    AlgebraElement out = AlgebraElement::zero(sup);
    for (size_t i = 0; i < sup.blocks.size(); ++i)
        for (size_t j = 0; j < sub.blocks.size(); ++j) {
            int m = multiplicity[i][j];
            if (m == 0) continue;
            const Matrix& w = isometries[i][j];
            out.blocks[i] += w * kron(x.blocks[j], identity(m)) * w.adjoint();
        }
    return out;
}

void InclusionDescriptor::validate(const Tolerances& tol) const {
    sub.validate();
    sup.validate();
    if (multiplicity.size() != sup.blocks.size())
        throw std::invalid_argument("multiplicity row count mismatch");
    for (size_t i = 0; i < sup.blocks.size(); ++i) {
        if (multiplicity[i].size() != sub.blocks.size())
            throw std::invalid_argument("multiplicity column count mismatch");
        int total = 0;
        for (size_t j = 0; j < sub.blocks.size(); ++j) {
            int m = multiplicity[i][j];
            if (m < 0) throw std::invalid_argument("negative multiplicity");
            total += m * sub.blocks[j].dim;
            if (m == 0) continue;
            const Matrix& w = isometries[i][j];
            if (w.rows() != sup.blocks[i].dim || w.cols() != sub.blocks[j].dim * m)
                throw std::invalid_argument("isometry shape mismatch");
            double dev = frobenius(Matrix(w.adjoint() * w) -
                                   identity(sub.blocks[j].dim * m));
            if (dev > tol.orthogonality * std::max(1.0, double(w.cols())))
                throw std::invalid_argument("embedding is not isometric");
        }
        if (total != sup.blocks[i].dim)
            throw std::invalid_argument("multiplicities inconsistent with dimensions");
    }
    // Ranges must tile each sup block: the embedded identity is the identity.
    AlgebraElement one = embed(AlgebraElement::identity_element(sub));
    for (size_t i = 0; i < sup.blocks.size(); ++i) {
        double dev = frobenius(one.blocks[i] - identity(sup.blocks[i].dim));
        if (dev > tol.orthogonality * sup.blocks[i].dim)
            throw std::invalid_argument("embedding is not unital");
    }
    // *-homomorphism spot check on generators (matrix units of each sub block).
    for (size_t j = 0; j < sub.blocks.size(); ++j) {
        int d = sub.blocks[j].dim;
        AlgebraElement e01 = AlgebraElement::zero(sub);
        e01.blocks[j](0, d - 1) = 1.0;
        AlgebraElement prod = embed(e01) * embed(e01.adjoint());
        AlgebraElement direct = embed(e01 * e01.adjoint());
        if ((prod - direct).norm() > tol.orthogonality * 10)
            throw std::invalid_argument("embedding is not multiplicative");
    }
}

InclusionDescriptor inclusion_scalars(int dim) {
    InclusionDescriptor inc;
    inc.sub = full_matrix_algebra(1, "c");
    inc.sup = full_matrix_algebra(dim);
    inc.multiplicity = {{dim}};
    inc.isometries = {{identity(dim)}};
    return inc;
}

InclusionDescriptor inclusion_tensor_left(int da, int db) {
    InclusionDescriptor inc;
    inc.sub = full_matrix_algebra(da, "left");
    inc.sup = full_matrix_algebra(da * db);
    inc.multiplicity = {{db}};
    inc.isometries = {{identity(da * db)}};
    return inc;
}

InclusionDescriptor inclusion_repeated_block(int dim, int copies) {
    InclusionDescriptor inc;
    inc.sub = full_matrix_algebra(dim, "a");
    inc.sup = full_matrix_algebra(dim * copies);
    inc.multiplicity = {{copies}};
    // Columns ordered (sub index, copy index): basis vector e_{c*dim+s} of the
    // sup space carries copy c of sub coordinate s, so the isometry permutes
    // (s, c) -> c*dim + s.
    Matrix w = Matrix::Zero(dim * copies, dim * copies);
    for (int s = 0; s < dim; ++s)
        for (int c = 0; c < copies; ++c) w(c * dim + s, s * copies + c) = 1.0;
    inc.isometries = {{w}};
    return inc;
}

std::vector<int> ExpectationMap::column_multiplicity() const {
    std::vector<int> out(inclusion.sub.blocks.size(), 0);
    for (size_t j = 0; j < out.size(); ++j)
        for (size_t i = 0; i < inclusion.sup.blocks.size(); ++i)
            out[j] += inclusion.multiplicity[i][j];
    return out;
}

AlgebraElement ExpectationMap::apply(const AlgebraElement& y) const {
    y.check_shape();
    AlgebraElement out = AlgebraElement::zero(inclusion.sub);
    for (size_t i = 0; i < inclusion.sup.blocks.size(); ++i)
        for (size_t j = 0; j < inclusion.sub.blocks.size(); ++j) {
            int m = inclusion.multiplicity[i][j];
            if (m == 0) continue;
            const Matrix& w = inclusion.isometries[i][j];
            Matrix compressed = w.adjoint() * y.blocks[i] * w;
            out.blocks[j] += partial_trace_last(compressed, inclusion.sub.blocks[j].dim, m);
        }
    return out;
}

AlgebraElement ExpectationMap::subalgebra_projection(const AlgebraElement& y) const {
    AlgebraElement e = apply(y);
    std::vector<int> mult = column_multiplicity();
    for (size_t j = 0; j < e.blocks.size(); ++j) e.blocks[j] /= double(mult[j]);
    return inclusion.embed(e);
}

ExpectationMap trace_preserving_expectation(const InclusionDescriptor& inc) {
    inc.validate();
    return ExpectationMap{inc};
}

AlgebraElement restrict_density(const AlgebraElement& density,
                                const InclusionDescriptor& inc,
                                const Tolerances& tol) {
    density.check_shape();
    for (const auto& b : density.blocks) {
        HermEig e = hermitian_eig(b);
        if (e.values.minCoeff() < -tol.positivity)
            throw std::domain_error("restrict_density: density is not positive");
    }
    return ExpectationMap{inc}.apply(density);
}

AlgebraElement pinching_expectation(const AlgebraElement& x,
                                    const std::vector<AlgebraElement>& projections,
                                    const Tolerances& tol) {
    x.check_shape();
    if (projections.empty()) throw std::invalid_argument("no projections given");
    AlgebraElement sum = AlgebraElement::zero(x.alg);
    for (const auto& p : projections) {
        p.check_shape();
        sum = sum + p;
    }
    AlgebraElement one = AlgebraElement::identity_element(x.alg);
    if ((sum - one).norm() > tol.orthogonality * x.alg.total_dim())
        throw std::invalid_argument("projections do not sum to the identity");
    for (size_t a = 0; a < projections.size(); ++a)
        for (size_t b = a + 1; b < projections.size(); ++b)
            if ((projections[a] * projections[b]).norm() > tol.orthogonality * 10)
                throw std::invalid_argument("projections are not orthogonal");

    AlgebraElement out = AlgebraElement::zero(x.alg);
    for (const auto& p : projections) out = out + p * x * p;
    return out;
}

AlgebraElement diagonal_expectation(const AlgebraElement& x,
                                    const std::vector<Matrix>& masa_basis,
                                    const Tolerances& tol) {
    x.check_shape();
    if (masa_basis.size() != x.blocks.size())
        throw std::invalid_argument("one basis per block required");
    AlgebraElement out{x.alg, {}};
    for (size_t i = 0; i < x.blocks.size(); ++i) {
        const Matrix& u = masa_basis[i];
        int d = x.alg.blocks[i].dim;
        if (u.rows() != d || u.cols() != d)
            throw std::invalid_argument("basis shape mismatch");
        double gram = frobenius(Matrix(u.adjoint() * u) - identity(d));
        if (gram > tol.orthogonality * d)
            throw std::invalid_argument("basis is not orthonormal");
        Matrix rotated = u.adjoint() * x.blocks[i] * u;
        Matrix diag = rotated.diagonal().asDiagonal();
        out.blocks.push_back(u * diag * u.adjoint());
    }
    return out;
}

SimDiagElements simultaneous_diagonalization(const std::vector<AlgebraElement>& ops,
                                             const Tolerances& tol) {
    if (ops.empty()) throw std::invalid_argument("no operators");
    const auto& alg = ops.front().alg;
    SimDiagElements out;
    out.eigenvalues.resize(ops.size());
    for (size_t blk = 0; blk < alg.blocks.size(); ++blk) {
        std::vector<Matrix> mats;
        mats.reserve(ops.size());
        for (const auto& op : ops) mats.push_back(op.blocks[blk]);
        SimDiag sd = simultaneous_diagonalization(mats, tol);
        out.basis.push_back(sd.basis);
        for (size_t k = 0; k < ops.size(); ++k)
            out.eigenvalues[k].push_back(sd.eigenvalues[k]);
    }
    return out;
}

AlgebraElement matrix_exp(const AlgebraElement& x) {
    x.check_shape();
    AlgebraElement out{x.alg, {}};
    for (const auto& b : x.blocks) out.blocks.push_back(matrix_exp_hermitian(b));
    return out;
}

AlgebraElement matrix_log(const AlgebraElement& x, const Tolerances& tol) {
    x.check_shape();
    AlgebraElement out{x.alg, {}};
    for (const auto& b : x.blocks)
        out.blocks.push_back(matrix_log_positive(b, tol.log_positive));
    return out;
}

}  // namespace qms
