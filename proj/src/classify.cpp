#include "qms/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace qms {

const char* const kCandidateCaveat =
    "candidate value: the generator comes from stabilized finite-window "
    "difference lattices, which bound the flow spectrum from outside";
const char* const kIndeterminateCaveat =
    "no type assigned: a rational difference lattice is only a sufficient "
    "condition, and for irrational ratios the converse direction is not "
    "available, so the window data cannot settle the type";
const char* const kTracialNote =
    "fundamental block is a multiple of the identity; the state is tracial "
    "and outside the scope of the lattice criterion";

namespace {

struct Accumulator {
    // per sector of the current site: value -> (multiplicity, exact)
    struct Entry {
        double value;
        std::uint64_t multiplicity;
        std::optional<Rational> exact;
    };
    std::vector<std::vector<Entry>> per_sector;
    double dedup_tol;

    void add(int sector, double value, std::uint64_t mult,
             const std::optional<Rational>& exact) {
        auto& list = per_sector[sector];
        if (exact) {
            for (auto& e : list)
                if (e.exact && *e.exact == *exact) {
                    e.multiplicity += mult;
                    return;
                }
        } else {
            for (auto& e : list)
                if (!e.exact &&
                    std::fabs(e.value - value) <= dedup_tol * std::max(1.0, std::fabs(value))) {
                    e.multiplicity += mult;
                    return;
                }
        }
        list.push_back({value, mult, exact});
    }
};

// eigenvalues of one bond block with exact labels attached when available
struct BlockEigs {
    std::vector<double> values;
    std::vector<std::optional<Rational>> exact;
};

BlockEigs block_eigenvalues(const InteractionSpec& spec, const BondBlock& blk) {
    BlockEigs out;
    HermEig e = hermitian_eig(blk.h);
    for (int i = 0; i < e.values.size(); ++i) {
        out.values.push_back(e.values(i));
        out.exact.push_back(std::nullopt);
    }
    if (blk.exact_eigs && spec.mode == NumericMode::RationalLog) {
        // exact list is a multiset; align it with the ascending numeric order
        std::vector<Rational> sorted = *blk.exact_eigs;
        std::sort(sorted.begin(), sorted.end(),
                  [](const Rational& a, const Rational& b) { return a < b; });
        if (sorted.size() == out.values.size()) {
            const double unit = spec.base.log_value();
            bool consistent = true;
            for (size_t i = 0; i < sorted.size(); ++i)
                if (std::fabs(to_double(sorted[i]) * unit - out.values[i]) > 1e-9)
                    consistent = false;
            if (consistent)
                for (size_t i = 0; i < sorted.size(); ++i) out.exact[i] = sorted[i];
        }
    }
    return out;
}

Spectrum finalize(const Accumulator& acc, const SiteBlocks& last_site,
                  double dedup_tol) {
    // fold in the free incoming-factor multiplicity at the right edge and merge
    std::vector<SpectrumPoint> merged;
    std::vector<SpectrumPoint> exact_points;
    for (size_t b = 0; b < acc.per_sector.size(); ++b)
        for (const auto& e : acc.per_sector[b]) {
            SpectrumPoint p{e.value,
                            e.multiplicity *
                                static_cast<std::uint64_t>(last_site.sectors[b].nbar),
                            e.exact};
            (p.exact ? exact_points : merged).push_back(p);
        }
    // merge exact points by exact value
    std::map<Rational, SpectrumPoint> by_exact;
    for (const auto& p : exact_points) {
        auto it = by_exact.find(*p.exact);
        if (it == by_exact.end())
            by_exact.emplace(*p.exact, p);
        else
            it->second.multiplicity += p.multiplicity;
    }
    for (const auto& [key, p] : by_exact) merged.push_back(p);

    std::sort(merged.begin(), merged.end(),
              [](const SpectrumPoint& a, const SpectrumPoint& b) {
                  return a.value < b.value;
              });
    Spectrum out;
    for (const auto& p : merged) {
        if (!out.empty() && !p.exact && !out.back().exact &&
            std::fabs(out.back().value - p.value) <=
                dedup_tol * std::max(1.0, std::fabs(p.value)))
            out.back().multiplicity += p.multiplicity;
        else
            out.push_back(p);
    }
    return out;
}

}  // namespace

Spectrum bond_spectrum(const InteractionSpec& spec, int bond) {
    require_valid(spec);
    const auto& left = spec.site(bond);
    const auto& right = spec.site(bond + 1);
    Accumulator acc;
    acc.dedup_tol = 1e-11;
    acc.per_sector.resize(right.sectors.size());
    for (size_t sl = 0; sl < left.sectors.size(); ++sl)
        for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
            BlockEigs be = block_eigenvalues(spec, spec.bond(bond).at(
                                                       static_cast<int>(sl),
                                                       static_cast<int>(sr)));
            for (size_t i = 0; i < be.values.size(); ++i)
                acc.add(static_cast<int>(sr), be.values[i],
                        static_cast<std::uint64_t>(left.sectors[sl].n), be.exact[i]);
        }
    return finalize(acc, right, acc.dedup_tol);
}

Spectrum path_sum_spectrum(const InteractionSpec& spec, const Segment& seg,
                           const Tolerances& tol) {
    require_valid(spec, tol);
    if (!spec.segment_in_chain(seg))
        throw std::out_of_range("segment outside the finite chain");
    const auto& first = spec.site(seg.first);

    Accumulator acc;
    acc.dedup_tol = tol.dedup;
    acc.per_sector.resize(first.sectors.size());
    for (size_t b = 0; b < first.sectors.size(); ++b)
        acc.add(static_cast<int>(b), 0.0,
                static_cast<std::uint64_t>(first.sectors[b].n), Rational(0));

    for (int j = seg.first; j < seg.last; ++j) {
        const auto& right = spec.site(j + 1);
        Accumulator next;
        next.dedup_tol = tol.dedup;
        next.per_sector.resize(right.sectors.size());
        for (size_t sl = 0; sl < acc.per_sector.size(); ++sl) {
            if (acc.per_sector[sl].empty()) continue;
            for (size_t sr = 0; sr < right.sectors.size(); ++sr) {
                BlockEigs be = block_eigenvalues(
                    spec, spec.bond(j).at(static_cast<int>(sl), static_cast<int>(sr)));
                for (const auto& e : acc.per_sector[sl])
                    for (size_t i = 0; i < be.values.size(); ++i) {
                        std::optional<Rational> exact;
                        if (e.exact && be.exact[i]) exact = *e.exact + *be.exact[i];
                        next.add(static_cast<int>(sr), e.value + be.values[i],
                                 e.multiplicity, exact);
                    }
            }
        }
        acc = std::move(next);
    }
    return finalize(acc, spec.site(seg.last), tol.dedup);
}

Spectrum leading_spectrum(const InteractionSpec& spec, int n, const Tolerances& tol) {
    if (!spec.periodic)
        throw std::invalid_argument("window spectra need a periodic spec");
    if (n < 1) throw std::invalid_argument("window must be >= 1");
    const int l = spec.period;
    return path_sum_spectrum(spec, make_segment(-l * n, l * n), tol);
}

Spectrum fundamental_spectrum(const InteractionSpec& spec, const Tolerances& tol) {
    if (!spec.periodic)
        throw std::invalid_argument("the fundamental block needs a periodic spec");
    return path_sum_spectrum(spec, make_segment(0, spec.period), tol);
}

std::vector<SpectrumPoint> SpectralDifferenceSet::positive() const {
    std::vector<SpectrumPoint> out;
    for (const auto& p : differences)
        if (p.value > dedup_tol) out.push_back(p);
    return out;
}

SpectralDifferenceSet difference_set(const Spectrum& spectrum, double dedup_tol) {
    if (spectrum.empty()) throw std::invalid_argument("empty spectrum");
    SpectralDifferenceSet out;
    out.spectrum = spectrum;
    out.dedup_tol = dedup_tol;

    bool exact = true;
    for (const auto& p : spectrum)
        if (!p.exact) exact = false;

    if (exact) {
        std::map<Rational, SpectrumPoint> seen;
        double unit = 0.0;
        for (const auto& a : spectrum)
            for (const auto& b : spectrum) {
                Rational d = *a.exact - *b.exact;
                if (!seen.count(d))
                    seen.emplace(d, SpectrumPoint{a.value - b.value, 1, d});
            }
        (void)unit;
        for (const auto& [key, p] : seen) out.differences.push_back(p);
    } else {
        std::vector<double> vals;
        for (const auto& a : spectrum)
            for (const auto& b : spectrum) vals.push_back(a.value - b.value);
        std::sort(vals.begin(), vals.end());
        for (double v : vals) {
            if (!out.differences.empty() &&
                std::fabs(out.differences.back().value - v) <=
                    dedup_tol * std::max(1.0, std::fabs(v)))
                continue;
            out.differences.push_back({v, 1, std::nullopt});
        }
    }
    return out;
}

RationalityReport rationality_check(const std::vector<double>& values,
                                    long long max_denominator, double tolerance) {
    if (values.empty()) throw std::invalid_argument("no differences to test");
    RationalityReport rep;
    rep.values = values;
    rep.reference = values.front();
    rep.max_denominator = max_denominator;
    rep.tolerance = tolerance;
    rep.accepted = true;
    if (rep.reference == 0.0) throw std::invalid_argument("zero reference difference");
    for (size_t i = 1; i < values.size(); ++i) {
        RationalityReport::Ratio r;
        r.value = rep.reference / values[i];
        BestRational approx = best_rational_approx(r.value, max_denominator);
        r.error = approx.error;
        r.ok = approx.error <= tolerance && approx.num != 0;
        r.p = std::llabs(approx.num);
        r.q = approx.num >= 0 ? approx.den : -approx.den;
        rep.ratios.push_back(r);
        if (!r.ok && !rep.witness) {
            rep.witness = values[i];
            rep.accepted = false;
        }
    }
    return rep;
}

RationalityReport rationality_check_exact(const std::vector<Rational>& values,
                                          double log_unit) {
    if (values.empty()) throw std::invalid_argument("no differences to test");
    RationalityReport rep;
    rep.exact_mode = true;
    rep.exact_values = values;
    rep.log_unit = log_unit;
    rep.reference = to_double(values.front()) * log_unit;
    rep.accepted = true;
    if (values.front() == Rational(0))
        throw std::invalid_argument("zero reference difference");
    for (size_t i = 0; i < values.size(); ++i)
        rep.values.push_back(to_double(values[i]) * log_unit);
    for (size_t i = 1; i < values.size(); ++i) {
        Rational ratio = values.front() / values[i];
        RationalityReport::Ratio r;
        r.value = to_double(ratio);
        r.p = std::llabs(ratio.numerator());
        r.q = ratio.numerator() >= 0 ? ratio.denominator() : -ratio.denominator();
        r.error = 0.0;
        r.ok = true;
        rep.ratios.push_back(r);
    }
    return rep;
}

AlphaData alpha_from_rationals(const RationalityReport& report) {
    if (!report.accepted) throw std::invalid_argument("tuple failed the ratio test");
    if (report.values.empty()) throw std::invalid_argument("empty tuple");
    AlphaData out;

    double log_prod = 0.0;
    for (const auto& r : report.ratios) log_prod += std::log(double(r.p));
    out.alpha = std::exp(-std::fabs(report.reference) / std::exp(log_prod));

    if (report.exact_mode) {
        long long prod = 1;
        for (const auto& r : report.ratios) {
            if (r.p != 0 && prod > (1LL << 62) / std::max(1LL, r.p))
                throw std::overflow_error("numerator product too large");
            prod *= r.p;
        }
        Rational ref = boost::abs(report.exact_values.front());
        out.exact_log_alpha = ref / prod;
        std::vector<Rational> mags;
        for (const auto& v : report.exact_values) mags.push_back(boost::abs(v));
        out.exact_log_best = rational_lattice_generator(mags);
        out.best_alpha = std::exp(-to_double(*out.exact_log_best) * report.log_unit);
        out.alpha = std::exp(-to_double(*out.exact_log_alpha) * report.log_unit);
        return out;
    }

    // lattice generator through integer multiples of ln(alpha)
    const double log_alpha = -std::fabs(report.reference) / std::exp(log_prod);
    long long g = 0;
    for (double v : report.values) {
        double m = v / log_alpha;
        long long mi = std::llround(m);
        if (std::fabs(m - double(mi)) > 1e-6 * std::max(1.0, std::fabs(m)))
            throw std::domain_error("value escapes the accepted lattice");
        g = std::gcd(g, std::llabs(mi));
    }
    out.best_alpha = std::exp(double(g) * log_alpha);
    return out;
}

namespace {

// lattice generator of a difference set, in the numeric and exact senses
std::pair<double, std::optional<Rational>> window_generator(
    const SpectralDifferenceSet& ds, const AlphaData& alpha) {
    std::vector<SpectrumPoint> pos = ds.positive();
    if (pos.empty()) return {0.0, Rational(0)};

    bool exact = alpha.exact_log_best.has_value();
    for (const auto& p : pos)
        if (!p.exact) exact = false;
    if (exact) {
        std::vector<Rational> mags;
        for (const auto& p : pos) mags.push_back(boost::abs(*p.exact));
        Rational g = rational_lattice_generator(mags);
        return {to_double(g), g};
    }

    const double log_alpha = std::log(alpha.best_alpha);
    long long g = 0;
    for (const auto& p : pos) {
        double m = p.value / log_alpha;
        long long mi = std::llround(m);
        if (std::fabs(m - double(mi)) > 1e-6 * std::max(1.0, std::fabs(m)))
            throw std::domain_error("window difference escapes the lattice");
        g = std::gcd(g, std::llabs(mi));
    }
    return {double(g) * std::fabs(log_alpha), std::nullopt};
}

}  // namespace

GeneratorStabilization generator_stabilization(const InteractionSpec& spec, int n_max,
                                               const AlphaData& alpha,
                                               const Tolerances& tol) {
    if (n_max < 1) throw std::invalid_argument("need at least one window");
    GeneratorStabilization out;
    const double unit = spec.base.log_value();
    for (int n = 1; n <= n_max; ++n) {
        SpectralDifferenceSet ds = difference_set(leading_spectrum(spec, n, tol), tol.dedup);
        auto [g, exact] = window_generator(ds, alpha);
        if (exact) {
            out.exact_per_window.push_back(*exact);
            out.per_window.push_back(to_double(*exact) * unit);
        } else {
            out.per_window.push_back(g);
        }
    }
    out.generator = out.per_window.back();
    if (!out.exact_per_window.empty() &&
        out.exact_per_window.size() == out.per_window.size())
        out.exact_generator = out.exact_per_window.back();
    if (out.per_window.size() >= 2) {
        const double a = out.per_window[out.per_window.size() - 2];
        const double b = out.per_window.back();
        if (out.exact_generator)
            out.stabilized = out.exact_per_window[out.exact_per_window.size() - 2] ==
                             *out.exact_generator;
        else
            out.stabilized = std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b));
    }
    return out;
}

FactorClassification classify(const InteractionSpec& spec, const ClassifyOptions& opts,
                              const Tolerances& tol) {
    if (!spec.periodic)
        throw std::invalid_argument("classification needs a periodic spec");
    require_valid(spec, tol);

    FactorClassification out;
    Spectrum fund = fundamental_spectrum(spec, tol);

    double spread = fund.back().value - fund.front().value;
    bool exact_collapse = fund.front().exact.has_value();
    if (exact_collapse)
        for (const auto& p : fund)
            if (!p.exact || !(*p.exact == *fund.front().exact)) exact_collapse = false;
    if (spread <= tol.tracial * std::max(1.0, std::fabs(fund.back().value)) ||
        exact_collapse) {
        out.verdict = FactorVerdict::Tracial;
        out.notes = kTracialNote;
        return out;
    }

    SpectralDifferenceSet ds = difference_set(fund, tol.dedup);
    std::vector<SpectrumPoint> pos = ds.positive();
    std::vector<double> vals;
    std::vector<Rational> exact_vals;
    bool exact = true;
    for (const auto& p : pos) {
        vals.push_back(p.value);
        if (p.exact)
            exact_vals.push_back(*p.exact);
        else
            exact = false;
    }

    out.rationality = exact ? rationality_check_exact(exact_vals, spec.base.log_value())
                            : rationality_check(vals, opts.max_denominator,
                                                opts.tolerance);
    if (!out.rationality.accepted) {
        out.verdict = FactorVerdict::IndeterminateIrrational;
        out.witness = out.rationality.witness;
        out.notes = kIndeterminateCaveat;
        return out;
    }

    out.alpha = alpha_from_rationals(out.rationality);
    GeneratorStabilization gs =
        generator_stabilization(spec, opts.max_windows, out.alpha, tol);

    out.verdict = FactorVerdict::TypeIIILambdaCandidate;
    out.window_generators = gs.per_window;
    out.stabilized = gs.stabilized;
    out.exact_generator = gs.exact_generator;
    out.generator = gs.generator;
    out.lambda = std::exp(-out.generator);
    out.notes = kCandidateCaveat;
    return out;
}

}  // namespace qms
