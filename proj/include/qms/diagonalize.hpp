#pragma once

#include <optional>
#include <vector>

#include "qms/algebra.hpp"
#include "qms/markov.hpp"

namespace qms {

// Eigenbases of the bond blocks: one maximal abelian refinement per bond and
// sector pair. Eigenvalues carry the stationary shift so they feed the measure
// directly; bases are deterministic (ascending order, pinned phases).
struct DiagonalAlgebraData {
    SegmentContext ctx;
    struct BondEig {
        Matrix basis;
        RealVector values;
    };
    // [bond offset][left sector][right sector]
    std::vector<std::vector<std::vector<BondEig>>> bonds;

    const BondEig& at(int bond_offset, int sl, int sr) const {
        return bonds[bond_offset][sl][sr];
    }
    double max_offdiagonal_residual() const;
};

DiagonalAlgebraData build_diagonal_algebra(const SegmentContext& ctx,
                                           const Tolerances& tol = Tolerances::defaults());

// Scalar boundary eigenvalues at the two cuts: K per sector on the left,
// K-hat per sector on the right (normalization included).
struct BoundaryTerms {
    std::vector<double> left_k;
    std::vector<double> right_k;
};

BoundaryTerms boundary_terms(const SegmentContext& ctx);

// One point of the diagonal spectrum: a sector path plus one eigenvector
// choice per bond.
struct AtomPath {
    std::vector<int> sectors;
    std::vector<int> choices;
};

// Inclusion of the edge-reduced subalgebra (outgoing factor at the left cut,
// full interior sites, incoming factor at the right cut) into the segment
// algebra. Blocks are indexed by (left sector, right sector) pairs.
InclusionDescriptor edge_reduced_inclusion(const SegmentContext& ctx);

// The potential of the restricted state assembled from the boundary scalars
// and the bond terms, expressed on the blocks of edge_reduced_inclusion.
AlgebraElement edge_reduced_potential(const SegmentContext& ctx,
                                      const Tolerances& tol = Tolerances::defaults());

// Max block deviation between exp(-edge_reduced_potential) and the
// trace-compatible restriction of the segment density.
double restriction_consistency(const SegmentContext& ctx,
                               const Tolerances& tol = Tolerances::defaults());

// Umegaki expectation onto the diagonal refinement, realized through the atom
// projections of the diagonal algebra. Dense maps are evaluated path by path
// in the rotated atom frame, so costs stay cubic in the segment dimension.
class DiagonalExpectation {
  public:
    DiagonalExpectation(const SegmentState& state, const DiagonalAlgebraData& data);

    const std::vector<AtomPath>& atoms() const { return atoms_; }
    long long num_atoms() const { return static_cast<long long>(atoms_.size()); }

    Matrix atom_projector(const AtomPath& atom) const;
    int atom_rank(const AtomPath& atom) const;

    // Canonical strip: sum of chi x chi over the atoms. Coincides with the
    // trace-compatible conditional expectation on the edge-reduced subalgebra.
    Matrix strip(const Matrix& x) const;

    // phi(chi_a) for every atom, in atom order.
    std::vector<double> atom_state_weights() const;

    // Measure-weighted atom decomposition of the density: sum over atoms of
    // (w_a / phi(chi_a)) chi_a rho chi_a for externally supplied weights w.
    Matrix weighted_decomposition(const std::vector<double>& weights) const;

    // phi(chi x chi) / phi(chi) per atom: the state-compatible expectation that
    // extends the canonical one from the edge-reduced subalgebra to the whole
    // segment algebra.
    std::vector<Complex> state_values(const Matrix& x) const;

    const SegmentState& state() const { return *state_; }

  private:
    struct PathData {
        std::vector<int> sectors;
        Matrix isometry;       // segment space <- path block
        Matrix rotation;       // path block -> atom frame
        long long block_dim = 0;
        long long bond_states = 1;  // number of atoms in this path
        int nbar_right = 1;
        size_t atom_base = 0;
    };

    long long atom_id(const PathData& p, long long block_index) const {
        return (block_index / p.nbar_right) % p.bond_states;
    }

    const SegmentState* state_;
    const DiagonalAlgebraData* data_;
    std::vector<AtomPath> atoms_;
    std::vector<PathData> paths_;
};

// phi-invariance of the canonical strip on the edge-reduced subalgebra
// (max trace-pairing deviation over random elements).
double expectation_invariance(const DiagonalExpectation& exp, int samples,
                              std::uint64_t seed);

// Compatibility of the canonical strips of a nested segment pair: the outer
// expectation restricted to the inner edge-reduced subalgebra equals the inner
// expectation. Returns the max deviation over a spanning or sampled set.
double commuting_square_check(const InteractionSpec& spec, const Segment& inner,
                              int samples = 24,
                              const Tolerances& tol = Tolerances::defaults());

struct ClassicalMarkovChain {
    Segment segment;
    std::vector<double> left_k;     // per sector of the first site
    std::vector<double> right_k;    // per sector of the last site
    // [bond offset][left sector][right sector] -> eigenvalue list
    std::vector<std::vector<std::vector<RealVector>>> bond_eigs;

    struct Refined {
        int sl, sr, idx;
    };
    std::vector<std::vector<Refined>> states;   // refined state space per bond
    std::vector<double> initial;                // over states[0]; over sectors if no bonds
    std::vector<Eigen::MatrixXd> transitions;   // step maps between bond state spaces

    std::vector<AtomPath> atoms;
    std::vector<double> weights;                // closed-form atom measure
    std::vector<double> certified_weights;      // brute-force values when computed
    double total_mass = 0.0;
    double certification_deviation = 0.0;

    double atom_weight(const AtomPath& atom) const;  // closed form
    int num_sectors(int site_offset) const;
};

struct ExtractOptions {
    bool certify = true;           // brute-force every atom against the state
    long long max_enumerated = 1 << 16;
};

ClassicalMarkovChain extract_markov_measure(const SegmentState& state,
                                            const DiagonalAlgebraData& data,
                                            const ExtractOptions& opts = {});

// Full-basis theorem deviation: entrywise distance between the density and its
// measure-weighted atom decomposition.
double verify_diagonalization(const SegmentState& state,
                              const DiagonalAlgebraData& data,
                              const ClassicalMarkovChain& chain);

// Conditional independence of past and future given the sector at an interior
// site, evaluated on the extracted measure. Exhaustive over singleton event
// pairs below the limit plus sampled composite events; sampled pairs otherwise.
double markov_property_check(const ClassicalMarkovChain& chain, int site,
                             int samples = 100, std::uint64_t seed = 2024);

struct DiagonalizationRun {
    DiagonalAlgebraData data;
    BoundaryTerms boundaries;
    ClassicalMarkovChain chain;
    double basis_residual = 0.0;
    double restriction_deviation = 0.0;
    double invariance_deviation = 0.0;
    double theorem_deviation = 0.0;
    double certification_deviation = 0.0;
    double markov_deviation = 0.0;
    std::optional<double> commuting_square_deviation;
};

struct RunOptions {
    bool check_commuting_square = true;
    bool certify_measure = true;
    int invariance_samples = 12;
    int markov_samples = 100;
};

DiagonalizationRun run_diagonalization(const InteractionSpec& spec, const Segment& seg,
                                       const RunOptions& opts = {},
                                       const Tolerances& tol = Tolerances::defaults());

}  // namespace qms
