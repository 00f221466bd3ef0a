#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qms/markov.hpp"
#include "qms/rational.hpp"

namespace qms {

// One spectral value with its multiplicity; exact bookkeeping (multiples of
// the spec's log unit) rides along when every contributing block carries it.
struct SpectrumPoint {
    double value = 0.0;
    std::uint64_t multiplicity = 1;
    std::optional<Rational> exact;
};

using Spectrum = std::vector<SpectrumPoint>;  // ascending by value

// Spectrum of a single bond term on its two-site space.
Spectrum bond_spectrum(const InteractionSpec& spec, int bond);

// Spectrum of the summed bond terms over [first, last], computed as sector-path
// sums of bond eigenvalues. Always available; agrees with the dense eigensolve
// whenever that fits in memory.
Spectrum path_sum_spectrum(const InteractionSpec& spec, const Segment& seg,
                           const Tolerances& tol = Tolerances::defaults());

// Spectrum of the leading term over the symmetric window of n periods each way.
Spectrum leading_spectrum(const InteractionSpec& spec, int n,
                          const Tolerances& tol = Tolerances::defaults());

// Spectrum of the one-period block starting at site zero.
Spectrum fundamental_spectrum(const InteractionSpec& spec,
                              const Tolerances& tol = Tolerances::defaults());

struct SpectralDifferenceSet {
    int window = 0;                 // periods each way; 0 for the fundamental block
    Spectrum spectrum;
    std::vector<SpectrumPoint> differences;  // symmetric around zero, deduplicated
    double dedup_tol = 1e-11;

    std::vector<SpectrumPoint> positive() const;  // strictly positive side
};

SpectralDifferenceSet difference_set(const Spectrum& spectrum,
                                     double dedup_tol = 1e-11);

struct RationalityReport {
    bool exact_mode = false;
    bool accepted = false;
    std::vector<double> values;              // the tuple handed in
    std::vector<Rational> exact_values;
    double reference = 0.0;                  // first element
    struct Ratio {
        double value = 0.0;     // reference / element
        long long p = 1;        // positive numerator
        long long q = 1;        // signed denominator
        double error = 0.0;
        bool ok = false;
    };
    std::vector<Ratio> ratios;               // one per remaining element
    std::optional<double> witness;           // first rejected element
    long long max_denominator = 64;
    double tolerance = 1e-9;
    double log_unit = 1.0;                   // exact values are multiples of this
};

// Continued-fraction (or exact) rationality of every pairwise ratio against
// the first element of the tuple.
RationalityReport rationality_check(const std::vector<double>& values,
                                    long long max_denominator, double tolerance);
RationalityReport rationality_check_exact(const std::vector<Rational>& values,
                                          double log_unit = 1.0);

struct AlphaData {
    double alpha = 0.0;       // from the literal product formula
    double best_alpha = 0.0;  // from the lattice generator
    std::optional<Rational> exact_log_alpha;  // |x1| / prod p, in log units
    std::optional<Rational> exact_log_best;   // lattice generator, in log units
};

// The base of the common log-lattice: alpha = exp(-|x1| / prod_j p_j), and the
// finest admissible choice from the rational gcd of the tuple.
AlphaData alpha_from_rationals(const RationalityReport& report);

struct GeneratorStabilization {
    double generator = 0.0;
    bool stabilized = false;
    std::vector<double> per_window;          // window n = 1, 2, ...
    std::vector<Rational> exact_per_window;  // exact mode only
    std::optional<Rational> exact_generator;
};

// Lattice generator of the window difference sets for n = 1..n_max; stabilized
// when the last two windows agree.
GeneratorStabilization generator_stabilization(const InteractionSpec& spec, int n_max,
                                               const AlphaData& alpha,
                                               const Tolerances& tol = Tolerances::defaults());

enum class FactorVerdict { Tracial, TypeIIILambdaCandidate, IndeterminateIrrational };

struct FactorClassification {
    FactorVerdict verdict = FactorVerdict::Tracial;
    double lambda = 0.0;
    double generator = 0.0;
    bool stabilized = false;
    std::vector<double> window_generators;
    std::optional<Rational> exact_generator;
    std::optional<double> witness;
    std::string notes;
    RationalityReport rationality;
    AlphaData alpha;
};

// Wording used in reports; tests key on these.
extern const char* const kCandidateCaveat;
extern const char* const kIndeterminateCaveat;
extern const char* const kTracialNote;

struct ClassifyOptions {
    int max_windows = 3;
    long long max_denominator = 64;
    double tolerance = 1e-9;
};

FactorClassification classify(const InteractionSpec& spec,
                              const ClassifyOptions& opts = {},
                              const Tolerances& tol = Tolerances::defaults());

}  // namespace qms
