#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace qms {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// Closed integer interval [first, last] of chain sites.
struct Segment {
    int first = 0;
    int last = 0;

    int num_sites() const { return last - first + 1; }
    int num_bonds() const { return last - first; }
    bool contains(const Segment& inner) const {
        return first <= inner.first && inner.last <= last;
    }
};

inline Segment make_segment(int first, int last) {
    if (last < first) throw std::invalid_argument("segment: last < first");
    return Segment{first, last};
}

// All numeric thresholds used by the library live here. QMS_TOL_SCALE in the
// environment multiplies every tolerance (not the structural limits).
struct Tolerances {
    double hermitian = 1e-12;         // relative Frobenius deviation from x*
    double commutation = 1e-12;       // relative, per commutator pair
    double orthogonality = 1e-12;     // projector family checks
    double trace_preserving = 1e-12;
    double simdiag_commute = 1e-10;   // precondition for joint diagonalization
    double simdiag_residual = 1e-9;   // off-diagonal residual after rotation
    double eig_cluster = 1e-9;        // eigenvalue gap that counts as degenerate
    double exp_log_roundtrip = 1e-10;
    double positivity = 1e-10;        // min eigenvalue floor for densities
    double log_positive = 1e-14;      // strict positivity needed by matrix_log
    double pairing = 1e-12;           // trace pairing identities
    double expectation = 1e-10;       // conditional-expectation identities
    double state_agreement = 1e-10;   // dense vs block-path, relative
    double projectivity = 1e-10;
    double kms = 1e-9;
    double modular = 1e-10;
    double unit_trace = 1e-12;
    double markov = 1e-10;            // conditional independence checks
    double roundtrip = 1e-12;         // stochastic matrix recovery
    double tracial = 1e-12;           // spectrum collapse detection
    double dedup = 1e-11;             // spectral difference dedup
    double rational = 1e-9;           // continued-fraction acceptance
    int max_denominator = 64;
    int dense_dim_limit = 4096;

    static Tolerances defaults() {
        Tolerances t;
        if (const char* s = std::getenv("QMS_TOL_SCALE")) {
            double scale = std::atof(s);
            if (scale > 0.0) t.scale_by(scale);
        }
        return t;
    }

    void scale_by(double s) {
        hermitian *= s;
        commutation *= s;
        orthogonality *= s;
        trace_preserving *= s;
        simdiag_commute *= s;
        simdiag_residual *= s;
        eig_cluster *= s;
        exp_log_roundtrip *= s;
        positivity *= s;
        log_positive *= s;
        pairing *= s;
        expectation *= s;
        state_agreement *= s;
        projectivity *= s;
        kms *= s;
        modular *= s;
        unit_trace *= s;
        markov *= s;
        roundtrip *= s;
        tracial *= s;
        dedup *= s;
        rational *= s;
    }
};

}  // namespace qms
