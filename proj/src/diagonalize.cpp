#include "qms/diagonalize.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

namespace qms {

double DiagonalAlgebraData::max_offdiagonal_residual() const {
    double worst = 0.0;
    for (size_t t = 0; t < bonds.size(); ++t)
        for (size_t sl = 0; sl < bonds[t].size(); ++sl)
            for (size_t sr = 0; sr < bonds[t][sl].size(); ++sr) {
                const auto& be = bonds[t][sl][sr];
                const int j = ctx.segment.first + static_cast<int>(t);
                Matrix blk = ctx.bond_block(j, static_cast<int>(sl), static_cast<int>(sr));
                Matrix rotated = be.basis.adjoint() * blk * be.basis;
                rotated.diagonal().setZero();
                worst = std::max(worst, frobenius(rotated) /
                                            std::max(1.0, frobenius(blk)));
            }
    return worst;
}

DiagonalAlgebraData build_diagonal_algebra(const SegmentContext& ctx,
                                           const Tolerances& tol) {
    DiagonalAlgebraData data;
    data.ctx = ctx;
    const Segment seg = ctx.segment;
    for (int t = 0; t < seg.num_bonds(); ++t) {
        const int j = seg.first + t;
        const auto& left = ctx.site(j);
        const auto& right = ctx.site(j + 1);
        std::vector<std::vector<DiagonalAlgebraData::BondEig>> per_bond(
            left.sectors.size());
        for (size_t sl = 0; sl < left.sectors.size(); ++sl) {
            per_bond[sl].resize(right.sectors.size());
            for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
                Matrix blk = ctx.bond_block(j, static_cast<int>(sl), static_cast<int>(sr));
                HermEig e = hermitian_eig(blk, tol.eig_cluster);
                per_bond[sl][sr] = {e.vectors, e.values};
            }
        }
        data.bonds.push_back(std::move(per_bond));
    }
    return data;
}

BoundaryTerms boundary_terms(const SegmentContext& ctx) {
    BoundaryTerms bt;
    const auto& first = ctx.site(ctx.segment.first);
    for (size_t b = 0; b < first.sectors.size(); ++b) {
        double tr = matrix_exp_hermitian(Matrix(-ctx.left_block(static_cast<int>(b))))
                        .trace()
                        .real();
        bt.left_k.push_back(-std::log(tr));
    }
    const auto& last = ctx.site(ctx.segment.last);
    for (size_t b = 0; b < last.sectors.size(); ++b) {
        double tr = matrix_exp_hermitian(Matrix(-ctx.right_block(static_cast<int>(b))))
                        .trace()
                        .real();
        bt.right_k.push_back(-std::log(tr));
    }
    return bt;
}

InclusionDescriptor edge_reduced_inclusion(const SegmentContext& ctx) {
    const Segment seg = ctx.segment;
    const auto& first = ctx.site(seg.first);
    const auto& last = ctx.site(seg.last);
    long long interior = 1;
    for (int j = seg.first + 1; j <= seg.last - 1; ++j) interior *= ctx.site(j).dim;

    InclusionDescriptor inc;
    inc.sup = full_matrix_algebra(static_cast<int>(ctx.dense_dim()), "segment");
    const int nb_first = static_cast<int>(first.sectors.size());
    const int nb_last = static_cast<int>(last.sectors.size());

    if (seg.num_sites() == 1) {
        // single site: the reduced algebra is the center, one scalar per sector
        inc.multiplicity.resize(1);
        inc.isometries.resize(1);
        for (int b = 0; b < nb_first; ++b) {
            inc.sub.blocks.push_back({first.sectors[b].label, 1});
            inc.multiplicity[0].push_back(first.sectors[b].n * first.sectors[b].nbar);
            inc.isometries[0].push_back(first.sector_isometry(b));
        }
        return inc;
    }

    inc.multiplicity.resize(1);
    inc.isometries.resize(1);
    for (int bl = 0; bl < nb_first; ++bl)
        for (int br = 0; br < nb_last; ++br) {
            const int nbar = first.sectors[bl].nbar;
            const int n = last.sectors[br].n;
            const int sub_dim = static_cast<int>(nbar * interior * n);
            const int mult = first.sectors[bl].n * last.sectors[br].nbar;
            inc.sub.blocks.push_back(
                {first.sectors[bl].label + "|" + last.sectors[br].label, sub_dim});
            inc.multiplicity[0].push_back(mult);

            // Columns ordered (sub index, mult index); the sub index runs over
            // (outgoing left factor, interior sites, incoming right factor),
            // the multiplicity index over (left n factor, right nbar factor).
            Matrix vl = first.sector_isometry(bl);  // columns (i, ibar)
            Matrix vr = last.sector_isometry(br);
            const long long dim = ctx.dense_dim();
            Matrix w = Matrix::Zero(dim, static_cast<long long>(sub_dim) * mult);
            const int nl = first.sectors[bl].n;
            const int nbr = last.sectors[br].nbar;
            for (int ibar = 0; ibar < nbar; ++ibar)
                for (long long x = 0; x < interior; ++x)
                    for (int i = 0; i < n; ++i)
                        for (int il = 0; il < nl; ++il)
                            for (int ibr = 0; ibr < nbr; ++ibr) {
                                long long sub_idx = (ibar * interior + x) * n + i;
                                long long col = sub_idx * mult + (il * nbr + ibr);
                                Vector vcol_l = vl.col(il * nbar + ibar);
                                Vector vcol_r = vr.col(i * nbr + ibr);
                                for (int rl = 0; rl < first.dim; ++rl) {
                                    if (std::abs(vcol_l(rl)) < 1e-300) continue;
                                    for (int rr = 0; rr < last.dim; ++rr) {
                                        if (std::abs(vcol_r(rr)) < 1e-300) continue;
                                        long long row =
                                            (rl * interior + x) * last.dim + rr;
                                        w(row, col) = vcol_l(rl) * vcol_r(rr);
                                    }
                                }
                            }
            inc.isometries[0].push_back(std::move(w));
        }
    return inc;
}

AlgebraElement edge_reduced_potential(const SegmentContext& ctx, const Tolerances& tol) {
    const Segment seg = ctx.segment;
    InclusionDescriptor inc = edge_reduced_inclusion(ctx);
    BoundaryTerms bt = boundary_terms(ctx);
    AlgebraElement h = AlgebraElement::zero(inc.sub);
    const auto& first = ctx.site(seg.first);
    const auto& last = ctx.site(seg.last);
    (void)tol;

    if (seg.num_sites() == 1) {
        for (size_t b = 0; b < first.sectors.size(); ++b)
            h.blocks[b](0, 0) = bt.left_k[b] + bt.right_k[b];
        return h;
    }

    int blk_idx = 0;
    for (size_t bl = 0; bl < first.sectors.size(); ++bl)
        for (size_t br = 0; br < last.sectors.size(); ++br, ++blk_idx) {
            const int nbar = first.sectors[bl].nbar;
            const int n = last.sectors[br].n;
            // virtual edge sites: only the outgoing factor survives at the left
            // cut, only the incoming factor at the right cut
            SiteBlocks vleft;
            vleft.dim = nbar;
            vleft.sectors = {{first.sectors[bl].label, 1, nbar}};
            SiteBlocks vright;
            vright.dim = n;
            vright.sectors = {{last.sectors[br].label, n, 1}};

            std::vector<int> dims{nbar};
            for (int j = seg.first + 1; j <= seg.last - 1; ++j)
                dims.push_back(ctx.site(j).dim);
            dims.push_back(n);
            const int nsites = static_cast<int>(dims.size());
            long long bd = 1;
            for (int d : dims) bd *= d;

            Matrix hb = (bt.left_k[bl] + bt.right_k[br]) * Matrix::Identity(bd, bd);
            for (int t = 0; t < nsites - 1; ++t) {
                const int j = seg.first + t;
                const SiteBlocks& sl_site = (t == 0) ? vleft : ctx.site(j);
                const SiteBlocks& sr_site =
                    (t == nsites - 2) ? vright : ctx.site(j + 1);
                const int dd = sl_site.dim * sr_site.dim;
                Matrix two = Matrix::Zero(dd, dd);
                for (size_t a = 0; a < sl_site.sectors.size(); ++a)
                    for (size_t b = 0; b < sr_site.sectors.size(); ++b) {
                        int phys_l = (t == 0) ? static_cast<int>(bl) : static_cast<int>(a);
                        int phys_r = (t == nsites - 2) ? static_cast<int>(br)
                                                       : static_cast<int>(b);
                        Matrix blk = ctx.bond_block(j, phys_l, phys_r);
                        Matrix w = kron(sl_site.sector_isometry(static_cast<int>(a)),
                                        sr_site.sector_isometry(static_cast<int>(b)));
                        Matrix mid =
                            kron(kron(identity(sl_site.sectors[a].n), blk),
                                 identity(sr_site.sectors[b].nbar));
                        two += w * mid * w.adjoint();
                    }
                long long before = 1, after = 1;
                for (int i = 0; i < t; ++i) before *= dims[i];
                for (int i = t + 2; i < nsites; ++i) after *= dims[i];
                Matrix term = two;
                if (before > 1) term = kron(Matrix::Identity(before, before), term);
                if (after > 1) term = kron(term, Matrix::Identity(after, after));
                hb += term;
            }
            h.blocks[blk_idx] = hb;
        }
    return h;
}

double restriction_consistency(const SegmentContext& ctx, const Tolerances& tol) {
    SegmentState state(ctx, tol);
    Matrix rho = state.dense_density();
    InclusionDescriptor inc = edge_reduced_inclusion(ctx);
    AlgebraElement density{inc.sup, {rho}};
    AlgebraElement restricted = restrict_density(density, inc, tol);
    AlgebraElement expected = matrix_exp(edge_reduced_potential(ctx, tol).scaled(-1.0));
    double worst = 0.0;
    for (size_t b = 0; b < restricted.blocks.size(); ++b)
        worst = std::max(
            worst, (restricted.blocks[b] - expected.blocks[b]).cwiseAbs().maxCoeff());
    return worst;
}

namespace {

std::vector<AtomPath> enumerate_atoms(const SegmentContext& ctx,
                                      const DiagonalAlgebraData& data,
                                      long long limit) {
    std::vector<AtomPath> atoms;
    const Segment seg = ctx.segment;
    for (const auto& sectors : enumerate_paths(ctx)) {
        std::vector<int> sizes;
        for (int t = 0; t < seg.num_bonds(); ++t)
            sizes.push_back(
                static_cast<int>(data.at(t, sectors[t], sectors[t + 1]).values.size()));
        std::vector<int> cur(sizes.size(), 0);
        while (true) {
            atoms.push_back({sectors, cur});
            if (static_cast<long long>(atoms.size()) > limit)
                throw std::length_error("diagonal spectrum too large to enumerate");
            int pos = static_cast<int>(cur.size()) - 1;
            while (pos >= 0) {
                if (++cur[pos] < sizes[pos]) break;
                cur[pos] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    }
    return atoms;
}

}  // namespace

DiagonalExpectation::DiagonalExpectation(const SegmentState& state,
                                         const DiagonalAlgebraData& data)
    : state_(&state), data_(&data) {
    atoms_ = enumerate_atoms(state.context(), data, 1LL << 22);
    const auto& ctx = state.context();
    const Segment seg = ctx.segment;
    size_t atom_base = 0;
    for (const auto& sectors : enumerate_paths(ctx)) {
        PathData p;
        p.sectors = sectors;
        p.isometry = state.path_isometry(sectors);
        const auto& first = ctx.site(seg.first);
        const auto& last = ctx.site(seg.last);
        std::vector<Matrix> factors;
        factors.push_back(identity(first.sectors[sectors.front()].n));
        for (int t = 0; t < seg.num_bonds(); ++t) {
            const auto& be = data.at(t, sectors[t], sectors[t + 1]);
            factors.push_back(be.basis);
            p.bond_states *= be.values.size();
        }
        p.nbar_right = last.sectors[sectors.back()].nbar;
        factors.push_back(identity(p.nbar_right));
        p.rotation = kron_all(factors);
        p.block_dim = p.rotation.rows();
        p.atom_base = atom_base;
        atom_base += static_cast<size_t>(p.bond_states);
        paths_.push_back(std::move(p));
    }
    if (atom_base != atoms_.size())
        throw std::logic_error("atom enumeration mismatch");
}

int DiagonalExpectation::atom_rank(const AtomPath& atom) const {
    const auto& ctx = state_->context();
    const auto& first = ctx.site(ctx.segment.first);
    const auto& last = ctx.site(ctx.segment.last);
    return first.sectors[atom.sectors.front()].n *
           last.sectors[atom.sectors.back()].nbar;
}

Matrix DiagonalExpectation::atom_projector(const AtomPath& atom) const {
    const auto& ctx = state_->context();
    const auto& first = ctx.site(ctx.segment.first);
    const auto& last = ctx.site(ctx.segment.last);
    std::vector<Matrix> factors;
    factors.push_back(identity(first.sectors[atom.sectors.front()].n));
    for (size_t t = 0; t < atom.choices.size(); ++t) {
        const auto& be =
            data_->at(static_cast<int>(t), atom.sectors[t], atom.sectors[t + 1]);
        Vector v = be.basis.col(atom.choices[t]);
        factors.push_back(v * v.adjoint());
    }
    factors.push_back(identity(last.sectors[atom.sectors.back()].nbar));
    Matrix k = state_->path_isometry(atom.sectors);
    return k * kron_all(factors) * k.adjoint();
}

Matrix DiagonalExpectation::strip(const Matrix& x) const {
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    for (const auto& p : paths_) {
        Matrix framed = p.rotation.adjoint() *
                        (p.isometry.adjoint() * x * p.isometry) * p.rotation;
        for (long long r = 0; r < p.block_dim; ++r)
            for (long long c = 0; c < p.block_dim; ++c)
                if (atom_id(p, r) != atom_id(p, c)) framed(r, c) = 0.0;
        out += p.isometry * (p.rotation * framed * p.rotation.adjoint()) *
               p.isometry.adjoint();
    }
    return out;
}

std::vector<double> DiagonalExpectation::atom_state_weights() const {
    const Matrix& rho = state_->dense_density();
    std::vector<double> weights(atoms_.size(), 0.0);
    for (const auto& p : paths_) {
        Matrix framed = p.rotation.adjoint() *
                        (p.isometry.adjoint() * rho * p.isometry) * p.rotation;
        for (long long r = 0; r < p.block_dim; ++r)
            weights[p.atom_base + atom_id(p, r)] += framed(r, r).real();
    }
    return weights;
}

Matrix DiagonalExpectation::weighted_decomposition(
    const std::vector<double>& weights) const {
    if (weights.size() != atoms_.size())
        throw std::invalid_argument("one weight per atom required");
    const Matrix& rho = state_->dense_density();
    std::vector<double> phi = atom_state_weights();
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto& p : paths_) {
        Matrix framed = p.rotation.adjoint() *
                        (p.isometry.adjoint() * rho * p.isometry) * p.rotation;
        for (long long r = 0; r < p.block_dim; ++r)
            for (long long c = 0; c < p.block_dim; ++c) {
                const long long ar = atom_id(p, r);
                if (ar != atom_id(p, c)) {
                    framed(r, c) = 0.0;
                    continue;
                }
                const size_t idx = p.atom_base + ar;
                framed(r, c) *= weights[idx] / phi[idx];
            }
        out += p.isometry * (p.rotation * framed * p.rotation.adjoint()) *
               p.isometry.adjoint();
    }
    return out;
}

std::vector<Complex> DiagonalExpectation::state_values(const Matrix& x) const {
    std::vector<Complex> vals;
    vals.reserve(atoms_.size());
    const Matrix& rho = state_->dense_density();
    for (const auto& atom : atoms_) {
        Matrix p = atom_projector(atom);
        Complex num = (rho * p * x * p).trace();
        Complex den = (rho * p).trace();
        vals.push_back(num / den);
    }
    return vals;
}

double expectation_invariance(const DiagonalExpectation& exp, int samples,
                              std::uint64_t seed) {
    const SegmentState& state = exp.state();
    InclusionDescriptor inc = edge_reduced_inclusion(state.context());
    Rng rng(seed);
    const Matrix& rho = state.dense_density();
    double worst = 0.0;
    for (int rep = 0; rep < samples; ++rep) {
        AlgebraElement x = AlgebraElement::zero(inc.sub);
        for (size_t b = 0; b < x.blocks.size(); ++b) {
            int d = inc.sub.blocks[b].dim;
            Matrix m(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) m(i, j) = rng.gaussian_complex();
            x.blocks[b] = m / std::max(1.0, frobenius(m));
        }
        Matrix dense = inc.embed(x).blocks[0];
        Complex direct = (rho * dense).trace();
        Complex stripped = (rho * exp.strip(dense)).trace();
        worst = std::max(worst, std::abs(direct - stripped));
    }
    return worst;
}

double commuting_square_check(const InteractionSpec& spec, const Segment& inner,
                              int samples, const Tolerances& tol) {
    const Segment outer = make_segment(inner.first - 1, inner.last + 1);
    if (!spec.segment_in_chain(outer))
        throw std::out_of_range("no room for the enclosing segment");

    SegmentContext ictx = segment_context(spec, inner, tol);
    SegmentContext octx = segment_context(spec, outer, tol);
    SegmentState istate(ictx, tol);
    SegmentState ostate(octx, tol);
    DiagonalAlgebraData idata = build_diagonal_algebra(ictx, tol);
    DiagonalAlgebraData odata = build_diagonal_algebra(octx, tol);
    DiagonalExpectation iexp(istate, idata);
    DiagonalExpectation oexp(ostate, odata);

    const int dl = spec.site(outer.first).dim;
    const int dr = spec.site(outer.last).dim;
    InclusionDescriptor inc = edge_reduced_inclusion(ictx);

    Rng rng(777);
    double worst = 0.0;
    for (int rep = 0; rep < samples; ++rep) {
        AlgebraElement x = AlgebraElement::zero(inc.sub);
        for (size_t b = 0; b < x.blocks.size(); ++b) {
            int d = inc.sub.blocks[b].dim;
            Matrix m(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) m(i, j) = rng.gaussian_complex();
            x.blocks[b] = m / std::max(1.0, frobenius(m));
        }
        Matrix dense_inner = inc.embed(x).blocks[0];
        Matrix embedded = kron(kron(identity(dl), dense_inner), identity(dr));
        Matrix via_outer = oexp.strip(embedded);
        Matrix via_inner =
            kron(kron(identity(dl), iexp.strip(dense_inner)), identity(dr));
        worst = std::max(worst, (via_outer - via_inner).cwiseAbs().maxCoeff());
    }
    return worst;
}

double ClassicalMarkovChain::atom_weight(const AtomPath& atom) const {
    double log_w = -left_k[atom.sectors.front()] - right_k[atom.sectors.back()];
    for (size_t t = 0; t < atom.choices.size(); ++t)
        log_w -= bond_eigs[t][atom.sectors[t]][atom.sectors[t + 1]](atom.choices[t]);
    return std::exp(log_w);
}

int ClassicalMarkovChain::num_sectors(int site_offset) const {
    if (bond_eigs.empty()) return static_cast<int>(left_k.size());
    if (site_offset < static_cast<int>(bond_eigs.size()))
        return static_cast<int>(bond_eigs[site_offset].size());
    return static_cast<int>(bond_eigs.back().front().size());
}

ClassicalMarkovChain extract_markov_measure(const SegmentState& state,
                                            const DiagonalAlgebraData& data,
                                            const ExtractOptions& opts) {
    const SegmentContext& ctx = state.context();
    const Segment seg = ctx.segment;
    ClassicalMarkovChain chain;
    chain.segment = seg;
    BoundaryTerms bt = boundary_terms(ctx);
    chain.left_k = bt.left_k;
    chain.right_k = bt.right_k;

    for (int t = 0; t < seg.num_bonds(); ++t) {
        const auto& left = ctx.site(seg.first + t);
        const auto& right = ctx.site(seg.first + t + 1);
        std::vector<std::vector<RealVector>> eigs(left.sectors.size());
        std::vector<ClassicalMarkovChain::Refined> refined;
        for (size_t sl = 0; sl < left.sectors.size(); ++sl) {
            eigs[sl].resize(right.sectors.size());
            for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
                eigs[sl][sr] =
                    data.at(t, static_cast<int>(sl), static_cast<int>(sr)).values;
                for (int i = 0; i < eigs[sl][sr].size(); ++i)
                    refined.push_back({static_cast<int>(sl), static_cast<int>(sr), i});
            }
        }
        chain.bond_eigs.push_back(std::move(eigs));
        chain.states.push_back(std::move(refined));
    }

    // backward partial partition weights per sector
    const int nb = seg.num_bonds();
    std::vector<std::vector<double>> back(nb + 1);
    {
        const auto& last = ctx.site(seg.last);
        back[nb].resize(last.sectors.size());
        for (size_t b = 0; b < last.sectors.size(); ++b)
            back[nb][b] = std::exp(-chain.right_k[b]);
        for (int t = nb - 1; t >= 0; --t) {
            const auto& left = ctx.site(seg.first + t);
            back[t].assign(left.sectors.size(), 0.0);
            for (size_t sl = 0; sl < left.sectors.size(); ++sl)
                for (size_t sr = 0; sr < chain.bond_eigs[t][sl].size(); ++sr) {
                    const RealVector& ev = chain.bond_eigs[t][sl][sr];
                    for (int i = 0; i < ev.size(); ++i)
                        back[t][sl] += std::exp(-ev(i)) * back[t + 1][sr];
                }
        }
    }

    if (nb == 0) {
        const auto& site = ctx.site(seg.first);
        for (size_t b = 0; b < site.sectors.size(); ++b)
            chain.initial.push_back(std::exp(-chain.left_k[b] - chain.right_k[b]));
    } else {
        for (const auto& st : chain.states[0])
            chain.initial.push_back(
                std::exp(-chain.left_k[st.sl]) *
                std::exp(-chain.bond_eigs[0][st.sl][st.sr](st.idx)) * back[1][st.sr]);
        for (int t = 0; t + 1 < nb; ++t) {
            Eigen::MatrixXd tr(chain.states[t].size(), chain.states[t + 1].size());
            for (size_t a = 0; a < chain.states[t].size(); ++a)
                for (size_t b = 0; b < chain.states[t + 1].size(); ++b) {
                    const auto& from = chain.states[t][a];
                    const auto& to = chain.states[t + 1][b];
                    if (from.sr != to.sl) {
                        tr(a, b) = 0.0;
                        continue;
                    }
                    tr(a, b) =
                        std::exp(-chain.bond_eigs[t + 1][to.sl][to.sr](to.idx)) *
                        back[t + 2][to.sr] / back[t + 1][to.sl];
                }
            chain.transitions.push_back(std::move(tr));
        }
    }

    chain.atoms = enumerate_atoms(ctx, data, opts.max_enumerated);
    chain.total_mass = 0.0;
    for (const auto& atom : chain.atoms) {
        chain.weights.push_back(chain.atom_weight(atom));
        chain.total_mass += chain.weights.back();
    }

    if (opts.certify && state.dense_available()) {
        DiagonalExpectation exp(state, data);
        chain.certified_weights = exp.atom_state_weights();
        double worst = 0.0;
        for (size_t i = 0; i < chain.atoms.size(); ++i)
            worst = std::max(worst,
                             std::fabs(chain.certified_weights[i] - chain.weights[i]));
        chain.certification_deviation = worst;
    }
    return chain;
}

double verify_diagonalization(const SegmentState& state,
                              const DiagonalAlgebraData& data,
                              const ClassicalMarkovChain& chain) {
    DiagonalExpectation exp(state, data);
    const Matrix& rho = state.dense_density();
    Matrix decomposed = exp.weighted_decomposition(chain.weights);
    return (rho - decomposed).cwiseAbs().maxCoeff();
}

namespace {

struct HalfAtoms {
    // atoms of the sub-segment ending (past) or starting (future) at the pivot
    std::vector<AtomPath> atoms;
    std::vector<double> weights;  // open at the pivot: no boundary factor there
    std::vector<int> pivot_sector;
};

HalfAtoms past_atoms(const ClassicalMarkovChain& chain, int pivot_offset) {
    HalfAtoms out;
    const int nb = pivot_offset;  // bonds strictly before the pivot
    std::function<void(AtomPath&, double)> rec = [&](AtomPath& cur, double logw) {
        const int t = static_cast<int>(cur.choices.size());
        if (t == nb) {
            out.atoms.push_back(cur);
            out.weights.push_back(std::exp(logw));
            out.pivot_sector.push_back(cur.sectors.back());
            return;
        }
        const auto& eigs = chain.bond_eigs[t];
        const int cur_sector = cur.sectors.back();
        for (size_t sr = 0; sr < eigs[cur_sector].size(); ++sr) {
            const RealVector& ev = eigs[cur_sector][sr];
            for (int i = 0; i < ev.size(); ++i) {
                cur.sectors.push_back(static_cast<int>(sr));
                cur.choices.push_back(i);
                rec(cur, logw - ev(i));
                cur.sectors.pop_back();
                cur.choices.pop_back();
            }
        }
    };
    const int first_sectors = static_cast<int>(chain.left_k.size());
    for (int b = 0; b < first_sectors; ++b) {
        AtomPath cur;
        cur.sectors = {b};
        rec(cur, -chain.left_k[b]);
    }
    return out;
}

HalfAtoms future_atoms(const ClassicalMarkovChain& chain, int pivot_offset) {
    HalfAtoms out;
    const int total_bonds = static_cast<int>(chain.bond_eigs.size());
    std::function<void(AtomPath&, double)> rec = [&](AtomPath& cur, double logw) {
        const int t = pivot_offset + static_cast<int>(cur.choices.size());
        if (t == total_bonds) {
            out.atoms.push_back(cur);
            out.weights.push_back(std::exp(logw - chain.right_k[cur.sectors.back()]));
            out.pivot_sector.push_back(cur.sectors.front());
            return;
        }
        const auto& eigs = chain.bond_eigs[t];
        const int cur_sector = cur.sectors.back();
        for (size_t sr = 0; sr < eigs[cur_sector].size(); ++sr) {
            const RealVector& ev = eigs[cur_sector][sr];
            for (int i = 0; i < ev.size(); ++i) {
                cur.sectors.push_back(static_cast<int>(sr));
                cur.choices.push_back(i);
                rec(cur, logw - ev(i));
                cur.sectors.pop_back();
                cur.choices.pop_back();
            }
        }
    };
    const int pivot_sectors = chain.num_sectors(pivot_offset);
    for (int b = 0; b < pivot_sectors; ++b) {
        AtomPath cur;
        cur.sectors = {b};
        rec(cur, 0.0);
    }
    return out;
}

// full-measure weight of the glued atom, using certified weights when present
double joint_weight(const ClassicalMarkovChain& chain,
                    const std::map<std::vector<int>, int>& index,
                    const AtomPath& past, const AtomPath& future) {
    AtomPath joint;
    joint.sectors = past.sectors;
    joint.sectors.insert(joint.sectors.end(), future.sectors.begin() + 1,
                         future.sectors.end());
    joint.choices = past.choices;
    joint.choices.insert(joint.choices.end(), future.choices.begin(),
                         future.choices.end());
    std::vector<int> key = joint.sectors;
    key.insert(key.end(), joint.choices.begin(), joint.choices.end());
    auto it = index.find(key);
    if (it == index.end()) throw std::logic_error("atom index lookup failed");
    return chain.certified_weights.empty() ? chain.weights[it->second]
                                           : chain.certified_weights[it->second];
}

}  // namespace

double markov_property_check(const ClassicalMarkovChain& chain, int site,
                             int samples, std::uint64_t seed) {
    const Segment seg = chain.segment;
    if (site < seg.first || site > seg.last)
        throw std::out_of_range("conditioning site outside the segment");
    const int pivot = site - seg.first;

    std::map<std::vector<int>, int> index;
    for (size_t i = 0; i < chain.atoms.size(); ++i) {
        std::vector<int> key = chain.atoms[i].sectors;
        key.insert(key.end(), chain.atoms[i].choices.begin(),
                   chain.atoms[i].choices.end());
        index[key] = static_cast<int>(i);
    }

    HalfAtoms past = past_atoms(chain, pivot);
    HalfAtoms future = future_atoms(chain, pivot);
    const int pivot_sectors = chain.num_sectors(pivot);

    double worst = 0.0;
    for (int w = 0; w < pivot_sectors; ++w) {
        std::vector<int> past_ids, future_ids;
        for (size_t i = 0; i < past.atoms.size(); ++i)
            if (past.pivot_sector[i] == w) past_ids.push_back(static_cast<int>(i));
        for (size_t i = 0; i < future.atoms.size(); ++i)
            if (future.pivot_sector[i] == w) future_ids.push_back(static_cast<int>(i));
        if (past_ids.empty() || future_ids.empty()) continue;

        // conditional probabilities from the full measure
        double p_pivot = 0.0;
        for (int a : past_ids)
            for (int b : future_ids)
                p_pivot += joint_weight(chain, index, past.atoms[a], future.atoms[b]);
        if (p_pivot <= 0.0)
            throw std::domain_error("conditioning sector has zero probability");

        auto p_joint = [&](const std::vector<int>& as, const std::vector<int>& bs) {
            double sum = 0.0;
            for (int a : as)
                for (int b : bs)
                    sum += joint_weight(chain, index, past.atoms[a], future.atoms[b]);
            return sum / p_pivot;
        };

        const long long pairs = static_cast<long long>(past_ids.size()) *
                                static_cast<long long>(future_ids.size());
        if (pairs <= (1 << 12)) {
            for (int a : past_ids)
                for (int b : future_ids) {
                    double lhs = p_joint({a}, {b});
                    double rhs = p_joint({a}, future_ids) * p_joint(past_ids, {b});
                    worst = std::max(worst, std::fabs(lhs - rhs));
                }
        }
        // sampled composite events
        Rng rng(seed + static_cast<std::uint64_t>(w));
        const int rounds = pairs <= (1 << 12) ? std::min(samples, 20) : samples;
        for (int rep = 0; rep < rounds; ++rep) {
            std::vector<int> as, bs;
            for (int a : past_ids)
                if (rng.uniform_int(2)) as.push_back(a);
            for (int b : future_ids)
                if (rng.uniform_int(2)) bs.push_back(b);
            if (as.empty() || bs.empty()) continue;
            double lhs = p_joint(as, bs);
            double rhs = p_joint(as, future_ids) * p_joint(past_ids, bs);
            worst = std::max(worst, std::fabs(lhs - rhs));
        }
    }
    return worst;
}

DiagonalizationRun run_diagonalization(const InteractionSpec& spec, const Segment& seg,
                                       const RunOptions& opts, const Tolerances& tol) {
    SegmentContext ctx = segment_context(spec, seg, tol);
    SegmentState state(ctx, tol);
    DiagonalizationRun run{build_diagonal_algebra(ctx, tol), boundary_terms(ctx), {}};
    run.basis_residual = run.data.max_offdiagonal_residual();
    run.restriction_deviation = restriction_consistency(ctx, tol);

    ExtractOptions eopts;
    eopts.certify = opts.certify_measure;
    run.chain = extract_markov_measure(state, run.data, eopts);
    run.certification_deviation = run.chain.certification_deviation;

    DiagonalExpectation exp(state, run.data);
    run.invariance_deviation = expectation_invariance(exp, opts.invariance_samples, 99);
    run.theorem_deviation = verify_diagonalization(state, run.data, run.chain);

    double markov_worst = 0.0;
    for (int site = seg.first + 1; site < seg.last; ++site)
        markov_worst = std::max(
            markov_worst, markov_property_check(run.chain, site, opts.markov_samples));
    run.markov_deviation = markov_worst;

    if (opts.check_commuting_square && spec.periodic) {
        const Segment outer = make_segment(seg.first - 1, seg.last + 1);
        if (spec.segment_dim(outer) <= tol.dense_dim_limit)
            run.commuting_square_deviation = commuting_square_check(spec, seg, 16, tol);
    }
    return run;
}

}  // namespace qms
