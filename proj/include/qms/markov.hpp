#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qms/linalg.hpp"
#include "qms/rational.hpp"
#include "qms/types.hpp"

namespace qms {

// Log-scale bookkeeping for exact classification: a value tagged exact equals
// rational * ln(base), with one base per spec (natural base when is_natural).
struct LogBase {
    bool is_natural = true;
    Rational base{2};

    double log_value() const { return is_natural ? 1.0 : std::log(to_double(base)); }
};

enum class NumericMode { Float, RationalLog };

// One chain site: the Hilbert space C^d split into labeled sectors, each a
// tensor product of an n-dimensional and an nbar-dimensional factor, plus the
// unitary that places this direct sum inside C^d.
struct SiteBlocks {
    struct Sector {
        std::string label;
        int n = 1;
        int nbar = 1;
    };
    int dim = 0;
    std::vector<Sector> sectors;
    std::vector<Matrix> h;     // per sector, n x n Hermitian
    std::vector<Matrix> hbar;  // per sector, nbar x nbar Hermitian
    Matrix embedding;          // d x d unitary; identity when trivial

    int sector_offset(int s) const;
    // d x (n*nbar) isometry carrying sector s into the site space.
    Matrix sector_isometry(int s) const;
    Matrix central_projection(int s) const;
    int find_label(const std::string& label) const;
};

struct BondBlock {
    Matrix h;  // (nbar_left * n_right) square Hermitian
    std::optional<std::vector<Rational>> exact_eigs;  // units of ln(base)
};

// Bond blocks between consecutive sites, indexed by (left sector, right sector).
struct BondBlocks {
    std::vector<std::vector<BondBlock>> block;
    const BondBlock& at(int sl, int sr) const { return block[sl][sr]; }
};

struct InteractionSpec {
    bool periodic = true;
    int period = 1;        // number of site patterns when periodic
    int first_site = 0;    // finite chains only
    std::vector<SiteBlocks> sites;   // size: period, or site count when finite
    std::vector<BondBlocks> bonds;   // size: period, or site count - 1
    NumericMode mode = NumericMode::Float;
    LogBase base;
    std::optional<std::uint64_t> seed;

    int num_sites() const { return static_cast<int>(sites.size()); }
    int site_index(int j) const;   // position in sites[] for chain site j
    const SiteBlocks& site(int j) const { return sites[site_index(j)]; }
    int bond_index(int j) const;   // bond between sites j and j+1
    const BondBlocks& bond(int j) const { return bonds[bond_index(j)]; }
    bool segment_in_chain(const Segment& seg) const;
    long long segment_dim(const Segment& seg) const;
};

struct ValidationIssue {
    std::string path;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

ValidationReport validate_spec(const InteractionSpec& spec,
                               const Tolerances& tol = Tolerances::defaults());
void require_valid(const InteractionSpec& spec,
                   const Tolerances& tol = Tolerances::defaults());

// Boundary data actually used at the two cut sites of a segment. For periodic
// specs the stationary completion fills these in; finite chains use the site
// blocks from the spec.
struct ResolvedBoundary {
    std::vector<Matrix> left;    // per sector of the first site, n x n
    std::vector<Matrix> right;   // per sector of the last site, nbar x nbar
    double bond_shift = 0.0;     // constant added to every bond block
    double log_z = 0.0;          // absorbed into the right boundary
};

// Stationary (Perron) completion of a periodic spec: bond blocks are shifted so
// the one-period transfer matrix has top eigenvalue 1, and the boundary blocks
// come from its left/right eigenvectors, making the segment family
// marginal-consistent with unit trace.
struct StationaryBoundaries {
    double bond_shift = 0.0;
    std::vector<std::vector<Matrix>> left_per_cut;    // [site residue][sector]
    std::vector<std::vector<Matrix>> right_per_cut;
    std::vector<RealVector> left_weights;    // s vectors per residue
    std::vector<RealVector> right_weights;   // t vectors per residue
    double perron_value = 0.0;               // before the shift
};

StationaryBoundaries stationary_boundaries(const InteractionSpec& spec,
                                           const Tolerances& tol = Tolerances::defaults());

// Everything needed to build and evaluate one segment state.
struct SegmentContext {
    std::shared_ptr<const InteractionSpec> spec;
    Segment segment;
    ResolvedBoundary boundary;

    const SiteBlocks& site(int j) const { return spec->site(j); }
    int num_sites() const { return segment.num_sites(); }
    std::vector<int> site_dims() const;
    long long dense_dim() const;
    // Effective Hermitian blocks with boundary data and shifts applied.
    Matrix left_block(int sector) const;
    Matrix right_block(int sector) const;
    Matrix bond_block(int j, int sl, int sr) const;  // shift applied
};

// Resolves boundaries: stationary completion for periodic specs, spec site
// blocks for finite chains; then normalizes the trace to one by absorbing the
// partition function into the right boundary.
SegmentContext segment_context(const InteractionSpec& spec, const Segment& seg,
                               const Tolerances& tol = Tolerances::defaults());
SegmentContext segment_context(const InteractionSpec& spec, const Segment& seg,
                               const StationaryBoundaries& stat,
                               const Tolerances& tol = Tolerances::defaults());

struct SegmentHamiltonian {
    SegmentContext ctx;
    Matrix left_term;                 // site term at the left cut
    Matrix right_term;                // site term at the right cut
    std::vector<Matrix> bond_terms;   // one per bond, on the full segment space
    std::vector<Matrix> site_terms;       // diagnostic: H_j for every site
    std::vector<Matrix> site_terms_bar;   // diagnostic: H^_j for every site
    Matrix total;                     // left + bonds + right
};

SegmentHamiltonian assemble_operators(const SegmentContext& ctx);
SegmentHamiltonian assemble_operators(const InteractionSpec& spec, const Segment& seg);

// Max Frobenius norm over the four commutator families; the assembled data
// passes at 1e-12 * scale by construction.
double verify_commutation(const SegmentHamiltonian& ham);

// Path-resolved representation of exp(-h): per sector path, the exponentials of
// the left block, the shifted bond blocks and the right block, in chain order.
struct PathFactors {
    std::vector<int> sectors;        // one sector index per site
    std::vector<Matrix> factors;     // exp(-block) per tensor factor
    double weight = 0.0;             // product of factor traces
};

enum class EvalMode { Dense, BlockPath };

class SegmentState {
  public:
    SegmentState(SegmentContext ctx, const Tolerances& tol = Tolerances::defaults());

    const SegmentContext& context() const { return ctx_; }
    const Segment& segment() const { return ctx_.segment; }
    const std::vector<PathFactors>& paths() const { return paths_; }
    long long dense_dim() const { return ctx_.dense_dim(); }

    // exp(-h) assembled from the path factors; quadratic in the dense dimension.
    Matrix block_path_density() const;
    // exp(-h) through the dense eigendecomposition; refused above the limit.
    const Matrix& dense_density() const;
    bool dense_available() const;

    Complex evaluate(const Matrix& observable, EvalMode mode) const;
    Complex evaluate(const Matrix& observable) const;  // dense if available

    // Isometry from the path sector space into the dense segment space.
    Matrix path_isometry(const std::vector<int>& sectors) const;
    Matrix path_projection(const std::vector<int>& sectors) const;

    const Tolerances& tolerances() const { return tol_; }

  private:
    SegmentContext ctx_;
    Tolerances tol_;
    std::vector<PathFactors> paths_;
    mutable std::optional<Matrix> dense_;
};

SegmentState segment_density(const InteractionSpec& spec, const Segment& seg,
                             const Tolerances& tol = Tolerances::defaults());
SegmentState segment_density(const SegmentContext& ctx,
                             const Tolerances& tol = Tolerances::defaults());

// Max deviation of phi(A) - phi(sum_P P A P) over the sector-path pinching,
// measured on the full matrix-unit basis via the representing densities.
double central_pinching_state(const SegmentState& state);

// |phi(A exp(-h) B exp(h)) - phi(B A)|, the finite-volume KMS identity.
double kms_check(const SegmentState& state, const Matrix& a, const Matrix& b);

// Sum of the raw bond terms over a segment, with no boundary or shift.
Matrix assemble_leading_term(const InteractionSpec& spec, const Segment& seg,
                             const Tolerances& tol = Tolerances::defaults());

// Heisenberg evolution of a local observable on [obs.first, obs.last] under the
// leading term of the window [-n, n]; stabilizes in n by locality.
Matrix modular_flow(const InteractionSpec& spec, const Matrix& observable,
                    const Segment& support, double t, int window,
                    const Tolerances& tol = Tolerances::defaults());

// Partial trace over the last site of a segment density.
Matrix trace_out_last_site(const Matrix& rho, const std::vector<int>& dims);
Matrix trace_out_first_site(const Matrix& rho, const std::vector<int>& dims);

// Enumerates sector paths of a segment (index tuples, leftmost site first).
std::vector<std::vector<int>> enumerate_paths(const SegmentContext& ctx);

}  // namespace qms
