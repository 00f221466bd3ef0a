#include "qms/models.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace qms {

namespace {

SiteBlocks spin_half_site() {
    SiteBlocks s;
    s.dim = 2;
    s.sectors = {{"+", 1, 1}, {"-", 1, 1}};
    s.h = {Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
    s.hbar = {Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
    return s;
}

BondBlocks ising_bond(double j) {
    const double sign[2] = {1.0, -1.0};
    BondBlocks b;
    b.block.resize(2);
    for (int sl = 0; sl < 2; ++sl) {
        b.block[sl].resize(2);
        for (int sr = 0; sr < 2; ++sr) {
            Matrix m(1, 1);
            m(0, 0) = j * sign[sl] * sign[sr];
            b.block[sl][sr].h = m;
        }
    }
    return b;
}

}  // namespace

InteractionSpec gen_ising(double j1, double j2) {
    InteractionSpec spec;
    spec.periodic = true;
    spec.period = 2;
    spec.sites = {spin_half_site(), spin_half_site()};
    spec.bonds = {ising_bond(j1), ising_bond(j2)};
    return spec;
}

InteractionSpec gen_ising_exact(const Rational& j1, const Rational& j2) {
    InteractionSpec spec = gen_ising(to_double(j1), to_double(j2));
    spec.mode = NumericMode::RationalLog;
    spec.base.is_natural = true;
    const Rational js[2] = {j1, j2};
    const Rational sign[2] = {Rational(1), Rational(-1)};
    for (int bond = 0; bond < 2; ++bond)
        for (int sl = 0; sl < 2; ++sl)
            for (int sr = 0; sr < 2; ++sr)
                spec.bonds[bond].block[sl][sr].exact_eigs = {js[bond] * sign[sl] * sign[sr]};
    return spec;
}

InteractionSpec gen_markov_lifting(const std::vector<std::vector<double>>& p,
                                   const Tolerances& tol) {
    const int d = static_cast<int>(p.size());
    if (d < 2) throw std::invalid_argument("transition matrix needs dimension >= 2");
    bool all_equal = true;
    for (const auto& row : p) {
        if (static_cast<int>(row.size()) != d)
            throw std::invalid_argument("transition matrix is not square");
        double sum = 0.0;
        for (double v : row) {
            if (v <= 0.0) throw std::invalid_argument("transition matrix entry is not positive");
            if (std::fabs(v - p[0][0]) > tol.roundtrip) all_equal = false;
            sum += v;
        }
        if (std::fabs(sum - 1.0) > tol.roundtrip)
            throw std::invalid_argument("transition matrix row does not sum to one");
    }
    if (all_equal)
        throw std::invalid_argument("transition matrix entries must not all coincide");

    InteractionSpec spec;
    spec.periodic = true;
    spec.period = 1;
    SiteBlocks site;
    site.dim = d;
    for (int i = 0; i < d; ++i) {
        site.sectors.push_back({std::to_string(i + 1), 1, 1});
        site.h.push_back(Matrix::Zero(1, 1));
        site.hbar.push_back(Matrix::Zero(1, 1));
    }
    spec.sites = {site};
    BondBlocks bond;
    bond.block.resize(d);
    for (int i = 0; i < d; ++i) {
        bond.block[i].resize(d);
        for (int j = 0; j < d; ++j) {
            Matrix m(1, 1);
            m(0, 0) = -std::log(p[i][j]);
            bond.block[i][j].h = m;
        }
    }
    spec.bonds = {bond};
    return spec;
}

namespace {

// Ordered sector shapes (n, nbar) with sum n*nbar = dim.
std::vector<std::vector<std::pair<int, int>>> sector_partitions(int dim,
                                                                bool nontrivial) {
    std::vector<std::pair<int, int>> shapes;
    for (int n = 1; n <= dim; ++n)
        for (int nb = 1; n * nb <= dim; ++nb)
            if (nontrivial || (n == 1 && nb == 1)) shapes.push_back({n, nb});
    std::vector<std::vector<std::pair<int, int>>> out;
    std::vector<std::pair<int, int>> cur;
    std::function<void(int)> rec = [&](int left) {
        if (left == 0) {
            if (cur.size() >= 1) out.push_back(cur);
            return;
        }
        for (const auto& s : shapes) {
            if (s.first * s.second > left) continue;
            cur.push_back(s);
            rec(left - s.first * s.second);
            cur.pop_back();
        }
    };
    rec(dim);
    return out;
}

struct PoolDraw {
    double value = 0.0;
    std::optional<Rational> exact;  // multiple of ln 2 when the pool allows it
};

PoolDraw draw_eigenvalue(Rng& rng, EigenvaluePool pool) {
    static const Rational small[] = {Rational(-2), Rational(-1), Rational(-1, 2),
                                     Rational(0),  Rational(1, 2), Rational(1),
                                     Rational(2),  Rational(3, 2)};
    const Rational r = small[rng.uniform_int(8)];
    PoolDraw d;
    if (pool == EigenvaluePool::Ln2) {
        d.value = to_double(r) * std::log(2.0);
        d.exact = r;
        return d;
    }
    const bool use3 = rng.uniform_int(2) == 1;
    d.value = to_double(r) * std::log(use3 ? 3.0 : 2.0);
    return d;
}

Matrix hermitian_from_eigs(const std::vector<double>& eigs, const Matrix& basis) {
    Eigen::VectorXd v(eigs.size());
    for (size_t i = 0; i < eigs.size(); ++i) v(i) = eigs[i];
    return basis * v.asDiagonal() * basis.adjoint();
}

}  // namespace

InteractionSpec gen_random(const RandomSpecParams& params) {
    Rng rng(params.seed);
    // Basis rotations come from a derived stream so toggling the lifting flag
    // leaves every eigenvalue draw untouched.
    Rng lift_rng(params.seed ^ 0x9e3779b97f4a7c15ULL);

    InteractionSpec spec;
    spec.periodic = true;
    spec.period = params.period > 0 ? params.period : 1 + rng.uniform_int(2);
    spec.seed = params.seed;
    if (params.pool == EigenvaluePool::Ln2) {
        spec.mode = NumericMode::RationalLog;
        spec.base.is_natural = false;
        spec.base.base = Rational(2);
    }

    std::vector<int> dims = params.site_dims;
    if (dims.empty())
        for (int r = 0; r < spec.period; ++r)
            dims.push_back(2 + rng.uniform_int(params.max_site_dim - 1));
    if (static_cast<int>(dims.size()) != spec.period)
        throw std::invalid_argument("site_dims must match the period");
    for (int d : dims)
        if (d < 1 || d > 6) throw std::invalid_argument("site dimensions must stay in [1, 6]");

    for (int r = 0; r < spec.period; ++r) {
        const int d = dims[r];
        auto partitions = sector_partitions(d, params.nontrivial_sectors);
        if (partitions.empty()) throw std::invalid_argument("no feasible sector partition");
        const auto& shape = partitions[rng.uniform_int(static_cast<int>(partitions.size()))];
        SiteBlocks site;
        site.dim = d;
        for (size_t b = 0; b < shape.size(); ++b) {
            site.sectors.push_back({"w" + std::to_string(b), shape[b].first, shape[b].second});
            std::vector<double> ev_n, ev_nbar;
            for (int i = 0; i < shape[b].first; ++i)
                ev_n.push_back(draw_eigenvalue(rng, params.pool).value);
            for (int i = 0; i < shape[b].second; ++i)
                ev_nbar.push_back(draw_eigenvalue(rng, params.pool).value);
            Matrix bn = params.lifting ? random_unitary(shape[b].first, lift_rng)
                                       : identity(shape[b].first);
            Matrix bb = params.lifting ? random_unitary(shape[b].second, lift_rng)
                                       : identity(shape[b].second);
            site.h.push_back(hermitian_from_eigs(ev_n, bn));
            site.hbar.push_back(hermitian_from_eigs(ev_nbar, bb));
        }
        if (params.lifting) site.embedding = random_unitary(d, lift_rng);
        spec.sites.push_back(std::move(site));
    }

    for (int r = 0; r < spec.period; ++r) {
        const auto& left = spec.sites[r];
        const auto& right = spec.sites[(r + 1) % spec.period];
        BondBlocks bond;
        bond.block.resize(left.sectors.size());
        for (size_t sl = 0; sl < left.sectors.size(); ++sl) {
            bond.block[sl].resize(right.sectors.size());
            for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
                const int bd = left.sectors[sl].nbar * right.sectors[sr].n;
                std::vector<double> eigs;
                std::vector<Rational> exact;
                bool exact_ok = true;
                for (int i = 0; i < bd; ++i) {
                    PoolDraw d = draw_eigenvalue(rng, params.pool);
                    eigs.push_back(d.value);
                    if (d.exact)
                        exact.push_back(*d.exact);
                    else
                        exact_ok = false;
                }
                Matrix basis = params.lifting ? random_unitary(bd, lift_rng) : identity(bd);
                bond.block[sl][sr].h = hermitian_from_eigs(eigs, basis);
                if (exact_ok && spec.mode == NumericMode::RationalLog)
                    bond.block[sl][sr].exact_eigs = exact;
            }
        }
        spec.bonds.push_back(std::move(bond));
    }
    return spec;
}

}  // namespace qms
