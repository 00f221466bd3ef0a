#include "qms/markov.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qms {

int SiteBlocks::sector_offset(int s) const {
    int off = 0;
    for (int i = 0; i < s; ++i) off += sectors[i].n * sectors[i].nbar;
    return off;
}

Matrix SiteBlocks::sector_isometry(int s) const {
    const int nd = sectors[s].n * sectors[s].nbar;
    Matrix v = Matrix::Zero(dim, nd);
    v.block(sector_offset(s), 0, nd, nd) = identity(nd);
    if (embedding.size() != 0) return embedding * v;
    return v;
}

Matrix SiteBlocks::central_projection(int s) const {
    Matrix v = sector_isometry(s);
    return v * v.adjoint();
}

int SiteBlocks::find_label(const std::string& label) const {
    for (size_t i = 0; i < sectors.size(); ++i)
        if (sectors[i].label == label) return static_cast<int>(i);
    throw std::invalid_argument("unknown sector label: " + label);
}

int InteractionSpec::site_index(int j) const {
    if (periodic) {
        int r = j % period;
        return r < 0 ? r + period : r;
    }
    int idx = j - first_site;
    if (idx < 0 || idx >= num_sites())
        throw std::out_of_range("site outside finite chain");
    return idx;
}

int InteractionSpec::bond_index(int j) const {
    if (periodic) {
        int r = j % period;
        return r < 0 ? r + period : r;
    }
    int idx = j - first_site;
    if (idx < 0 || idx >= static_cast<int>(bonds.size()))
        throw std::out_of_range("bond outside finite chain");
    return idx;
}

bool InteractionSpec::segment_in_chain(const Segment& seg) const {
    if (periodic) return true;
    return seg.first >= first_site && seg.last <= first_site + num_sites() - 1;
}

long long InteractionSpec::segment_dim(const Segment& seg) const {
    long long d = 1;
    for (int j = seg.first; j <= seg.last; ++j) d *= site(j).dim;
    return d;
}

namespace {

std::string idx_path(const std::string& base, size_t i) {
    std::ostringstream os;
    os << base << "[" << i << "]";
    return os.str();
}

void check_hermitian_block(const Matrix& m, int expect, const std::string& where,
                           const Tolerances& tol, std::vector<ValidationIssue>& out) {
    if (m.rows() != expect || m.cols() != expect) {
        out.push_back({where, "expected " + std::to_string(expect) + "x" +
                                  std::to_string(expect) + " block, got " +
                                  std::to_string(m.rows()) + "x" + std::to_string(m.cols())});
        return;
    }
    if (!is_hermitian(m, tol.hermitian))
        out.push_back({where, "block is not Hermitian"});
}

}  // namespace

ValidationReport validate_spec(const InteractionSpec& spec, const Tolerances& tol) {
    ValidationReport rep;
    auto& issues = rep.issues;

    if (spec.sites.empty()) {
        issues.push_back({"sites", "no sites"});
        return rep;
    }
    if (spec.periodic) {
        if (spec.period < 1) issues.push_back({"chain.period", "period must be >= 1"});
        if (spec.period != spec.num_sites())
            issues.push_back({"sites", "periodic spec needs one site pattern per period"});
        if (static_cast<int>(spec.bonds.size()) != spec.period)
            issues.push_back({"bonds", "periodic spec needs one bond pattern per period"});
    } else {
        if (spec.bonds.size() + 1 != spec.sites.size())
            issues.push_back({"bonds", "finite chain needs sites-1 bond patterns"});
    }
    if (spec.mode == NumericMode::RationalLog && !spec.base.is_natural &&
        spec.base.base <= Rational(1))
        issues.push_back({"mode.base", "log base must exceed 1"});

    for (size_t si = 0; si < spec.sites.size(); ++si) {
        const auto& site = spec.sites[si];
        const std::string sp = idx_path("sites", si);
        if (site.dim <= 0) issues.push_back({sp + ".dim", "non-positive dimension"});
        if (site.sectors.empty()) {
            issues.push_back({sp + ".blocks", "no sectors"});
            continue;
        }
        std::set<std::string> labels;
        int total = 0;
        for (size_t b = 0; b < site.sectors.size(); ++b) {
            const auto& sec = site.sectors[b];
            const std::string bp = sp + idx_path(".blocks", b);
            if (sec.n <= 0 || sec.nbar <= 0)
                issues.push_back({bp, "non-positive factor dimension"});
            if (!labels.insert(sec.label).second)
                issues.push_back({bp + ".label", "duplicate label " + sec.label});
            total += sec.n * sec.nbar;
        }
        if (total != site.dim)
            issues.push_back({sp + ".dim",
                              "sector dimensions sum to " + std::to_string(total) +
                                  " but site dimension is " + std::to_string(site.dim)});
        if (site.h.size() != site.sectors.size())
            issues.push_back({sp + ".h", "one block per sector required"});
        if (site.hbar.size() != site.sectors.size())
            issues.push_back({sp + ".hbar", "one block per sector required"});
        for (size_t b = 0; b < site.sectors.size() && b < site.h.size(); ++b)
            check_hermitian_block(site.h[b], site.sectors[b].n,
                                  sp + idx_path(".h", b), tol, issues);
        for (size_t b = 0; b < site.sectors.size() && b < site.hbar.size(); ++b)
            check_hermitian_block(site.hbar[b], site.sectors[b].nbar,
                                  sp + idx_path(".hbar", b), tol, issues);
        if (site.embedding.size() != 0) {
            if (site.embedding.rows() != site.dim || site.embedding.cols() != site.dim)
                issues.push_back({sp + ".embedding", "shape mismatch"});
            else if (frobenius(Matrix(site.embedding.adjoint() * site.embedding) -
                               identity(site.dim)) > tol.orthogonality * site.dim)
                issues.push_back({sp + ".embedding", "not unitary"});
        }
    }
    if (!issues.empty()) return rep;

    for (size_t bi = 0; bi < spec.bonds.size(); ++bi) {
        const auto& left = spec.sites[bi];
        const auto& right =
            spec.sites[spec.periodic ? (bi + 1) % spec.sites.size() : bi + 1];
        const auto& bond = spec.bonds[bi];
        const std::string bp = idx_path("bonds", bi);
        if (bond.block.size() != left.sectors.size()) {
            issues.push_back({bp, "one row per left sector required"});
            continue;
        }
        for (size_t sl = 0; sl < left.sectors.size(); ++sl) {
            if (bond.block[sl].size() != right.sectors.size()) {
                issues.push_back({bp + idx_path("", sl), "one block per right sector required"});
                continue;
            }
            for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
                const auto& blk = bond.block[sl][sr];
                const int dim = left.sectors[sl].nbar * right.sectors[sr].n;
                std::ostringstream os;
                os << bp << ".blocks[" << left.sectors[sl].label << ","
                   << right.sectors[sr].label << "]";
                check_hermitian_block(blk.h, dim, os.str(), tol, issues);
                if (blk.exact_eigs &&
                    static_cast<int>(blk.exact_eigs->size()) != dim)
                    issues.push_back({os.str(), "exact eigenvalue count mismatch"});
            }
        }
    }
    return rep;
}

void require_valid(const InteractionSpec& spec, const Tolerances& tol) {
    ValidationReport rep = validate_spec(spec, tol);
    if (!rep.ok()) {
        std::ostringstream os;
        os << "invalid interaction data:";
        for (const auto& issue : rep.issues)
            os << " [" << issue.path << "] " << issue.message << ";";
        throw std::invalid_argument(os.str());
    }
}

namespace {

// Scalar transfer matrix of one bond: full traces of the block exponentials.
Eigen::MatrixXd bond_transfer(const InteractionSpec& spec, int bond, double shift) {
    const auto& left = spec.sites[spec.site_index(bond)];
    const auto& right = spec.sites[spec.site_index(bond + 1)];
    const auto& blocks = spec.bonds[spec.bond_index(bond)];
    Eigen::MatrixXd v(left.sectors.size(), right.sectors.size());
    for (size_t sl = 0; sl < left.sectors.size(); ++sl)
        for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
            Matrix m = blocks.at(sl, sr).h;
            m += shift * identity(static_cast<int>(m.rows()));
            v(sl, sr) = matrix_exp_hermitian(Matrix(-m)).trace().real();
        }
    return v;
}

struct Perron {
    double value = 0.0;
    Eigen::VectorXd right;
    Eigen::VectorXd left;
};

Perron perron_data(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    if (m.minCoeff() <= 0.0)
        throw std::domain_error("transfer matrix has a non-positive entry");
    auto iterate = [n](const Eigen::MatrixXd& a) {
        Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / n;
        double lambda = 0.0;
        for (int it = 0; it < 2000; ++it) {
            Eigen::VectorXd w = a * v;
            lambda = w.sum();
            w /= lambda;
            if ((w - v).cwiseAbs().maxCoeff() < 1e-16) {
                v = w;
                break;
            }
            v = w;
        }
        return std::make_pair(lambda, v);
    };
    Perron p;
    auto [lam, right] = iterate(m);
    auto [lam2, left] = iterate(m.transpose());
    p.value = lam;
    p.right = right;
    p.left = left;
    (void)lam2;
    return p;
}

}  // namespace

StationaryBoundaries stationary_boundaries(const InteractionSpec& spec,
                                           const Tolerances& tol) {
    require_valid(spec, tol);
    if (!spec.periodic)
        throw std::invalid_argument("stationary boundaries need a periodic spec");
    const int p = spec.period;

    std::vector<Eigen::MatrixXd> v(p);
    for (int r = 0; r < p; ++r) v[r] = bond_transfer(spec, r, 0.0);

    Eigen::MatrixXd m0 = v[0];
    for (int r = 1; r < p; ++r) m0 = m0 * v[r];
    Perron per = perron_data(m0);
    if (!(per.value > 0.0) || !std::isfinite(per.value))
        throw std::domain_error("transfer matrix has no positive leading eigenvalue");

    StationaryBoundaries out;
    out.perron_value = per.value;
    out.bond_shift = std::log(per.value) / p;

    std::vector<Eigen::MatrixXd> vs(p);
    for (int r = 0; r < p; ++r) vs[r] = std::exp(-out.bond_shift) * v[r];

    // t^{(r)} = V'_r t^{(r+1)}, s^{(r+1)} = s^{(r)} V'_r, both period-consistent.
    std::vector<Eigen::VectorXd> t(p), s(p);
    t[0] = per.right;
    for (int r = p - 1; r >= 1; --r) t[r] = vs[r] * t[(r + 1) % p];
    s[0] = per.left;
    for (int r = 1; r < p; ++r) s[r] = vs[r - 1].transpose() * s[r - 1];
    // scale split: downstream weights peak at one, upstream carry the mass
    double peak = t[0].maxCoeff();
    for (int r = 0; r < p; ++r) t[r] /= peak;
    double z = s[0].dot(t[0]);
    for (int r = 0; r < p; ++r) s[r] /= z;

    out.left_weights.resize(p);
    out.right_weights.resize(p);
    for (int r = 0; r < p; ++r) {
        out.left_weights[r] = s[r];
        out.right_weights[r] = t[r];
    }

    out.left_per_cut.resize(p);
    out.right_per_cut.resize(p);
    for (int r = 0; r < p; ++r) {
        const auto& site = spec.sites[r];
        // Right boundary at a cut after site r: trace the incoming factor of the
        // next bond against the downstream weights.
        const int rb = r;  // bond between sites r and r+1
        const auto& next = spec.sites[(r + 1) % p];
        out.right_per_cut[r].resize(site.sectors.size());
        for (size_t b = 0; b < site.sectors.size(); ++b) {
            const int nbar = site.sectors[b].nbar;
            Matrix acc = Matrix::Zero(nbar, nbar);
            for (size_t b2 = 0; b2 < next.sectors.size(); ++b2) {
                Matrix blk = spec.bonds[rb].at(static_cast<int>(b), static_cast<int>(b2)).h;
                blk += out.bond_shift * identity(static_cast<int>(blk.rows()));
                Matrix e = matrix_exp_hermitian(Matrix(-blk));
                acc += partial_trace_last(e, nbar, next.sectors[b2].n) *
                       t[(r + 1) % p](b2);
            }
            out.right_per_cut[r][b] = -matrix_log_positive(acc, tol.log_positive);
        }
        // Left boundary at a cut before site r: trace the outgoing factor of the
        // previous bond against the upstream weights.
        const int lb = (r - 1 + p) % p;
        const auto& prev = spec.sites[lb];
        out.left_per_cut[r].resize(site.sectors.size());
        for (size_t b = 0; b < site.sectors.size(); ++b) {
            const int n = site.sectors[b].n;
            Matrix acc = Matrix::Zero(n, n);
            for (size_t b2 = 0; b2 < prev.sectors.size(); ++b2) {
                Matrix blk = spec.bonds[lb].at(static_cast<int>(b2), static_cast<int>(b)).h;
                blk += out.bond_shift * identity(static_cast<int>(blk.rows()));
                Matrix e = matrix_exp_hermitian(Matrix(-blk));
                acc += partial_trace_first(e, prev.sectors[b2].nbar, n) * s[lb](b2);
            }
            out.left_per_cut[r][b] = -matrix_log_positive(acc, tol.log_positive);
        }
    }
    return out;
}

std::vector<int> SegmentContext::site_dims() const {
    std::vector<int> dims;
    for (int j = segment.first; j <= segment.last; ++j) dims.push_back(site(j).dim);
    return dims;
}

long long SegmentContext::dense_dim() const { return spec->segment_dim(segment); }

Matrix SegmentContext::left_block(int sector) const { return boundary.left[sector]; }

Matrix SegmentContext::right_block(int sector) const {
    Matrix m = boundary.right[sector];
    return m + boundary.log_z * identity(static_cast<int>(m.rows()));
}

Matrix SegmentContext::bond_block(int j, int sl, int sr) const {
    Matrix m = spec->bond(j).at(sl, sr).h;
    return m + boundary.bond_shift * identity(static_cast<int>(m.rows()));
}

namespace {

// Trace of exp(-h) over the segment through the scalar transfer contraction.
double partition_function(const SegmentContext& ctx) {
    const auto& first = ctx.site(ctx.segment.first);
    Eigen::VectorXd w(first.sectors.size());
    for (size_t b = 0; b < first.sectors.size(); ++b)
        w(b) = matrix_exp_hermitian(Matrix(-ctx.boundary.left[b])).trace().real();
    for (int j = ctx.segment.first; j < ctx.segment.last; ++j) {
        const auto& right = ctx.site(j + 1);
        Eigen::VectorXd next = Eigen::VectorXd::Zero(right.sectors.size());
        const auto& left = ctx.site(j);
        for (size_t sl = 0; sl < left.sectors.size(); ++sl)
            for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
                Matrix blk = ctx.bond_block(j, static_cast<int>(sl), static_cast<int>(sr));
                next(sr) += w(sl) * matrix_exp_hermitian(Matrix(-blk)).trace().real();
            }
        w = next;
    }
    const auto& last = ctx.site(ctx.segment.last);
    double z = 0.0;
    for (size_t b = 0; b < last.sectors.size(); ++b)
        z += w(b) * matrix_exp_hermitian(Matrix(-ctx.boundary.right[b])).trace().real();
    return z;
}

SegmentContext resolve_context(const InteractionSpec& spec, const Segment& seg,
                               const StationaryBoundaries* stat,
                               const Tolerances& tol) {
    require_valid(spec, tol);
    if (!spec.segment_in_chain(seg))
        throw std::out_of_range("segment outside the finite chain");
    SegmentContext ctx;
    ctx.spec = std::make_shared<InteractionSpec>(spec);
    ctx.segment = seg;
    if (spec.periodic) {
        StationaryBoundaries local;
        const StationaryBoundaries* sb = stat;
        if (!sb) {
            local = stationary_boundaries(spec, tol);
            sb = &local;
        }
        ctx.boundary.left = sb->left_per_cut[spec.site_index(seg.first)];
        ctx.boundary.right = sb->right_per_cut[spec.site_index(seg.last)];
        ctx.boundary.bond_shift = sb->bond_shift;
    } else {
        const auto& first = spec.site(seg.first);
        const auto& last = spec.site(seg.last);
        ctx.boundary.left = first.h;
        ctx.boundary.right = last.hbar;
        ctx.boundary.bond_shift = 0.0;
    }
    ctx.boundary.log_z = 0.0;
    ctx.boundary.log_z = std::log(partition_function(ctx));
    return ctx;
}

}  // namespace

SegmentContext segment_context(const InteractionSpec& spec, const Segment& seg,
                               const Tolerances& tol) {
    return resolve_context(spec, seg, nullptr, tol);
}

SegmentContext segment_context(const InteractionSpec& spec, const Segment& seg,
                               const StationaryBoundaries& stat, const Tolerances& tol) {
    return resolve_context(spec, seg, &stat, tol);
}

namespace {

Matrix embed_sites(const std::vector<int>& dims, int pos, int span, const Matrix& op) {
    long long before = 1, after = 1;
    for (int i = 0; i < pos; ++i) before *= dims[i];
    for (size_t i = static_cast<size_t>(pos + span); i < dims.size(); ++i) after *= dims[i];
    Matrix out = op;
    if (before > 1) out = kron(Matrix::Identity(before, before), out);
    if (after > 1) out = kron(out, Matrix::Identity(after, after));
    return out;
}

Matrix site_term_n(const SiteBlocks& site, const std::vector<Matrix>& blocks) {
    Matrix a = Matrix::Zero(site.dim, site.dim);
    for (size_t b = 0; b < site.sectors.size(); ++b) {
        Matrix v = site.sector_isometry(static_cast<int>(b));
        a += v * kron(blocks[b], identity(site.sectors[b].nbar)) * v.adjoint();
    }
    return a;
}

Matrix site_term_nbar(const SiteBlocks& site, const std::vector<Matrix>& blocks) {
    Matrix a = Matrix::Zero(site.dim, site.dim);
    for (size_t b = 0; b < site.sectors.size(); ++b) {
        Matrix v = site.sector_isometry(static_cast<int>(b));
        a += v * kron(identity(site.sectors[b].n), blocks[b]) * v.adjoint();
    }
    return a;
}

Matrix bond_term(const SiteBlocks& left, const SiteBlocks& right,
                 const std::function<Matrix(int, int)>& block) {
    const int dd = left.dim * right.dim;
    Matrix a = Matrix::Zero(dd, dd);
    for (size_t sl = 0; sl < left.sectors.size(); ++sl)
        for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
            Matrix w = kron(left.sector_isometry(static_cast<int>(sl)),
                            right.sector_isometry(static_cast<int>(sr)));
            Matrix mid = kron(kron(identity(left.sectors[sl].n),
                                   block(static_cast<int>(sl), static_cast<int>(sr))),
                              identity(right.sectors[sr].nbar));
            a += w * mid * w.adjoint();
        }
    return a;
}

}  // namespace

SegmentHamiltonian assemble_operators(const SegmentContext& ctx) {
    if (ctx.dense_dim() > Tolerances::defaults().dense_dim_limit)
        throw std::length_error("segment too large for dense assembly");
    SegmentHamiltonian ham;
    ham.ctx = ctx;
    const Segment seg = ctx.segment;
    std::vector<int> dims = ctx.site_dims();
    const int ns = seg.num_sites();

    for (int t = 0; t < ns; ++t) {
        const int j = seg.first + t;
        const auto& site = ctx.site(j);
        std::vector<Matrix> nblocks = site.h;
        std::vector<Matrix> nbarblocks = site.hbar;
        if (t == 0)
            for (size_t b = 0; b < nblocks.size(); ++b) nblocks[b] = ctx.left_block(static_cast<int>(b));
        if (t == ns - 1)
            for (size_t b = 0; b < nbarblocks.size(); ++b)
                nbarblocks[b] = ctx.right_block(static_cast<int>(b));
        ham.site_terms.push_back(embed_sites(dims, t, 1, site_term_n(site, nblocks)));
        ham.site_terms_bar.push_back(
            embed_sites(dims, t, 1, site_term_nbar(site, nbarblocks)));
    }
    ham.left_term = ham.site_terms.front();
    ham.right_term = ham.site_terms_bar.back();

    for (int t = 0; t + 1 < ns; ++t) {
        const int j = seg.first + t;
        Matrix two = bond_term(ctx.site(j), ctx.site(j + 1), [&](int sl, int sr) {
            return ctx.bond_block(j, sl, sr);
        });
        ham.bond_terms.push_back(embed_sites(dims, t, 2, two));
    }

    const long long d = ctx.dense_dim();
    ham.total = Matrix::Zero(d, d);
    ham.total += ham.left_term;
    for (const auto& b : ham.bond_terms) ham.total += b;
    ham.total += ham.right_term;
    return ham;
}

SegmentHamiltonian assemble_operators(const InteractionSpec& spec, const Segment& seg) {
    return assemble_operators(segment_context(spec, seg));
}

double verify_commutation(const SegmentHamiltonian& ham) {
    auto rel = [](const Matrix& a, const Matrix& b) {
        return commutator_norm(a, b) / std::max(1.0, frobenius(a) * frobenius(b));
    };
    double worst = 0.0;
    const size_t nb = ham.bond_terms.size();
    for (size_t t = 0; t < nb; ++t) {
        worst = std::max(worst, rel(ham.site_terms[t], ham.bond_terms[t]));
        worst = std::max(worst, rel(ham.bond_terms[t], ham.site_terms_bar[t + 1]));
        if (t + 1 < nb)
            worst = std::max(worst, rel(ham.bond_terms[t], ham.bond_terms[t + 1]));
    }
    for (size_t t = 0; t < ham.site_terms.size(); ++t)
        worst = std::max(worst, rel(ham.site_terms[t], ham.site_terms_bar[t]));
    return worst;
}

std::vector<std::vector<int>> enumerate_paths(const SegmentContext& ctx) {
    std::vector<std::vector<int>> paths;
    const Segment seg = ctx.segment;
    std::vector<int> counts;
    for (int j = seg.first; j <= seg.last; ++j)
        counts.push_back(static_cast<int>(ctx.site(j).sectors.size()));
    std::vector<int> cur(counts.size(), 0);
    while (true) {
        paths.push_back(cur);
        int pos = static_cast<int>(cur.size()) - 1;
        while (pos >= 0) {
            if (++cur[pos] < counts[pos]) break;
            cur[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return paths;
}

SegmentState::SegmentState(SegmentContext ctx, const Tolerances& tol)
    : ctx_(std::move(ctx)), tol_(tol) {
    const Segment seg = ctx_.segment;
    for (const auto& sectors : enumerate_paths(ctx_)) {
        PathFactors pf;
        pf.sectors = sectors;
        pf.factors.push_back(
            matrix_exp_hermitian(Matrix(-ctx_.left_block(sectors.front()))));
        for (int t = 0; t + 1 < seg.num_sites(); ++t) {
            const int j = seg.first + t;
            pf.factors.push_back(matrix_exp_hermitian(
                Matrix(-ctx_.bond_block(j, sectors[t], sectors[t + 1]))));
        }
        pf.factors.push_back(
            matrix_exp_hermitian(Matrix(-ctx_.right_block(sectors.back()))));
        pf.weight = 1.0;
        for (const auto& f : pf.factors) pf.weight *= f.trace().real();
        paths_.push_back(std::move(pf));
    }
}

Matrix SegmentState::path_isometry(const std::vector<int>& sectors) const {
    std::vector<Matrix> vs;
    for (int t = 0; t < ctx_.num_sites(); ++t)
        vs.push_back(ctx_.site(ctx_.segment.first + t).sector_isometry(sectors[t]));
    return kron_all(vs);
}

Matrix SegmentState::path_projection(const std::vector<int>& sectors) const {
    Matrix k = path_isometry(sectors);
    return k * k.adjoint();
}

Matrix SegmentState::block_path_density() const {
    const long long d = dense_dim();
    Matrix rho = Matrix::Zero(d, d);
    for (const auto& pf : paths_) {
        Matrix k = path_isometry(pf.sectors);
        rho += k * kron_all(pf.factors) * k.adjoint();
    }
    return rho;
}

bool SegmentState::dense_available() const {
    return dense_dim() <= tol_.dense_dim_limit;
}

const Matrix& SegmentState::dense_density() const {
    if (!dense_available())
        throw std::length_error(
            "dense density refused above the dimension limit; use the block-path mode");
    if (!dense_) {
        SegmentHamiltonian ham = assemble_operators(ctx_);
        dense_ = matrix_exp_hermitian(Matrix(-ham.total));
    }
    return *dense_;
}

Complex SegmentState::evaluate(const Matrix& observable, EvalMode mode) const {
    const long long d = dense_dim();
    if (observable.rows() != d || observable.cols() != d)
        throw std::invalid_argument("observable dimension mismatch");
    if (mode == EvalMode::Dense) return (dense_density() * observable).trace();
    Complex acc = 0.0;
    for (const auto& pf : paths_) {
        Matrix k = path_isometry(pf.sectors);
        Matrix compressed = k.adjoint() * observable * k;
        acc += (kron_all(pf.factors) * compressed).trace();
    }
    return acc;
}

Complex SegmentState::evaluate(const Matrix& observable) const {
    return evaluate(observable,
                    dense_available() ? EvalMode::Dense : EvalMode::BlockPath);
}

SegmentState segment_density(const InteractionSpec& spec, const Segment& seg,
                             const Tolerances& tol) {
    return SegmentState(segment_context(spec, seg, tol), tol);
}

SegmentState segment_density(const SegmentContext& ctx, const Tolerances& tol) {
    return SegmentState(ctx, tol);
}

double central_pinching_state(const SegmentState& state) {
    Matrix rho = state.dense_available() ? state.dense_density()
                                         : state.block_path_density();
    Matrix pinched = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto& pf : state.paths()) {
        Matrix k = state.path_isometry(pf.sectors);
        pinched += k * (k.adjoint() * rho * k) * k.adjoint();
    }
    return (rho - pinched).cwiseAbs().maxCoeff();
}

double kms_check(const SegmentState& state, const Matrix& a, const Matrix& b) {
    SegmentHamiltonian ham = assemble_operators(state.context());
    HermEig e = hermitian_eig(ham.total);
    Matrix em = e.vectors * (-e.values.array()).exp().matrix().asDiagonal() *
                e.vectors.adjoint();
    Matrix ep = e.vectors * e.values.array().exp().matrix().asDiagonal() *
                e.vectors.adjoint();
    Complex lhs = (em * a * em * b * ep).trace();
    Complex rhs = (em * b * a).trace();
    return std::abs(lhs - rhs);
}

Matrix assemble_leading_term(const InteractionSpec& spec, const Segment& seg,
                             const Tolerances& tol) {
    if (!spec.segment_in_chain(seg))
        throw std::out_of_range("segment outside the finite chain");
    std::vector<int> dims;
    long long dtot = 1;
    for (int j = seg.first; j <= seg.last; ++j) {
        dims.push_back(spec.site(j).dim);
        dtot *= spec.site(j).dim;
    }
    if (dtot > tol.dense_dim_limit)
        throw std::length_error("segment too large for dense assembly");
    Matrix h = Matrix::Zero(dtot, dtot);
    for (int j = seg.first; j < seg.last; ++j) {
        Matrix two = bond_term(spec.site(j), spec.site(j + 1), [&](int sl, int sr) {
            return spec.bond(j).at(sl, sr).h;
        });
        h += embed_sites(dims, j - seg.first, 2, two);
    }
    return h;
}

Matrix modular_flow(const InteractionSpec& spec, const Matrix& observable,
                    const Segment& support, double t, int window,
                    const Tolerances& tol) {
    require_valid(spec, tol);
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (support.first < -window || support.last > window)
        throw std::invalid_argument("window too small to contain the observable");
    const Segment win = make_segment(-window, window);

    std::vector<int> dims;
    for (int j = win.first; j <= win.last; ++j) dims.push_back(spec.site(j).dim);

    long long dsup = 1;
    for (int j = support.first; j <= support.last; ++j) dsup *= spec.site(j).dim;
    if (observable.rows() != dsup || observable.cols() != dsup)
        throw std::invalid_argument("observable does not match its support");

    Matrix h = assemble_leading_term(spec, win, tol);
    Matrix a = embed_sites(dims, support.first - win.first, support.num_sites(),
                           observable);
    HermEig e = hermitian_eig(h);
    Vector phase(e.values.size());
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
        phase(i) = std::exp(Complex(0.0, t * e.values(i)));
    Matrix u = e.vectors * phase.asDiagonal() * e.vectors.adjoint();
    return u * a * u.adjoint();
}

Matrix trace_out_last_site(const Matrix& rho, const std::vector<int>& dims) {
    long long keep = 1;
    for (size_t i = 0; i + 1 < dims.size(); ++i) keep *= dims[i];
    return partial_trace_last(rho, static_cast<int>(keep), dims.back());
}

Matrix trace_out_first_site(const Matrix& rho, const std::vector<int>& dims) {
    long long keep = 1;
    for (size_t i = 1; i < dims.size(); ++i) keep *= dims[i];
    return partial_trace_first(rho, dims.front(), static_cast<int>(keep));
}

}  // namespace qms
