#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qms/classify.hpp"
#include "qms/models.hpp"

using namespace qms;

namespace {

// flattened ascending eigenvalue list with multiplicities expanded
std::vector<double> expand(const Spectrum& s) {
    std::vector<double> out;
    for (const auto& p : s)
        for (std::uint64_t i = 0; i < p.multiplicity; ++i) out.push_back(p.value);
    return out;
}

}  // namespace

TEST_CASE("bond spectrum of the alternating-coupling chain") {
    const double j = 1.7;
    Spectrum s = bond_spectrum(gen_ising(j, -0.4), 0);
    REQUIRE(s.size() == 2);
    CHECK(s[0].value == doctest::Approx(-j));
    CHECK(s[1].value == doctest::Approx(j));
    CHECK(s[0].multiplicity == 2);
    CHECK(s[1].multiplicity == 2);

    // exact bookkeeping carries the couplings
    Spectrum se = bond_spectrum(gen_ising_exact(Rational(3), Rational(1)), 0);
    REQUIRE(se.size() == 2);
    REQUIRE(se[0].exact.has_value());
    CHECK(*se[0].exact == Rational(-3));
    CHECK(*se[1].exact == Rational(3));
}

TEST_CASE("path sums against the dense eigensolve") {
    SUBCASE("two-period fundamental block") {
        InteractionSpec spec = gen_ising(1.0, 2.0);
        Spectrum s = path_sum_spectrum(spec, make_segment(0, 2));
        std::vector<double> flat = expand(s);
        REQUIRE(flat.size() == 8);
        // the four sign combinations of 1 and 2, each twice
        CHECK(flat.front() == doctest::Approx(-3.0));
        CHECK(flat.back() == doctest::Approx(3.0));

        Matrix dense = assemble_leading_term(spec, make_segment(0, 2));
        HermEig e = hermitian_eig(dense);
        for (size_t i = 0; i < flat.size(); ++i)
            CHECK(flat[i] == doctest::Approx(e.values(static_cast<int>(i))).epsilon(1e-10));
    }

    SUBCASE("random lifted specs, multiset equality") {
        for (std::uint64_t seed : {101u, 102u}) {
            RandomSpecParams params;
            params.seed = seed;
            params.lifting = true;
            params.max_site_dim = 3;
            InteractionSpec spec = gen_random(params);
            Segment seg = make_segment(0, 2);
            std::vector<double> flat = expand(path_sum_spectrum(spec, seg));
            Matrix dense = assemble_leading_term(spec, seg);
            HermEig e = hermitian_eig(dense);
            REQUIRE(static_cast<long long>(flat.size()) == e.values.size());
            for (size_t i = 0; i < flat.size(); ++i)
                CHECK(flat[i] ==
                      doctest::Approx(e.values(static_cast<int>(i))).epsilon(1e-9));
        }
    }

    SUBCASE("zero interaction collapses to a point") {
        Spectrum s = path_sum_spectrum(gen_ising(0.0, 0.0), make_segment(0, 2));
        REQUIRE(s.size() == 1);
        CHECK(s[0].value == doctest::Approx(0.0));
        CHECK(s[0].multiplicity == 8);
    }
}

TEST_CASE("difference sets") {
    SUBCASE("one coupling") {
        Spectrum s = bond_spectrum(gen_ising(1.5, 1.5), 0);
        SpectralDifferenceSet ds = difference_set(s);
        REQUIRE(ds.differences.size() == 3);
        CHECK(ds.differences[0].value == doctest::Approx(-3.0));
        CHECK(ds.differences[1].value == doctest::Approx(0.0));
        CHECK(ds.differences[2].value == doctest::Approx(3.0));
    }

    SUBCASE("two couplings: symmetric even lattice") {
        Spectrum s = path_sum_spectrum(gen_ising(1.0, 2.0), make_segment(0, 2));
        SpectralDifferenceSet ds = difference_set(s);
        std::vector<double> want{-6, -4, -2, 0, 2, 4, 6};
        REQUIRE(ds.differences.size() == want.size());
        for (size_t i = 0; i < want.size(); ++i)
            CHECK(ds.differences[i].value == doctest::Approx(want[i]));
    }

    SUBCASE("singleton spectrum") {
        Spectrum s{{2.5, 4, std::nullopt}};
        SpectralDifferenceSet ds = difference_set(s);
        REQUIRE(ds.differences.size() == 1);
        CHECK(ds.differences[0].value == doctest::Approx(0.0));
    }
}

TEST_CASE("rationality checks") {
    SUBCASE("commensurate logs are accepted") {
        RationalityReport rep = rationality_check(
            {2.0 * std::log(2.0), 3.0 * std::log(2.0)}, 64, 1e-9);
        CHECK(rep.accepted);
        REQUIRE(rep.ratios.size() == 1);
        CHECK(rep.ratios[0].p == 2);
        CHECK(rep.ratios[0].q == 3);
    }

    SUBCASE("sqrt(2) is rejected with a witness") {
        RationalityReport rep = rationality_check({1.0, std::sqrt(2.0)}, 64, 1e-9);
        CHECK(!rep.accepted);
        REQUIRE(rep.witness.has_value());
        CHECK(*rep.witness == doctest::Approx(std::sqrt(2.0)));
    }

    SUBCASE("a single difference is trivially rational") {
        RationalityReport rep = rationality_check({0.77}, 64, 1e-9);
        CHECK(rep.accepted);
        CHECK(rep.ratios.empty());
    }
}

TEST_CASE("alpha extraction") {
    SUBCASE("ln 4 and ln 8") {
        RationalityReport rep =
            rationality_check({std::log(4.0), std::log(8.0)}, 64, 1e-9);
        AlphaData a = alpha_from_rationals(rep);
        CHECK(a.alpha == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(a.best_alpha == doctest::Approx(0.5).epsilon(1e-12));
        // membership in the lattice of the best base
        for (double v : rep.values) {
            double m = v / std::log(a.best_alpha);
            CHECK(std::fabs(m - std::round(m)) < 1e-9);
        }
    }

    SUBCASE("single log") {
        RationalityReport rep = rationality_check({std::log(3.0)}, 64, 1e-9);
        AlphaData a = alpha_from_rationals(rep);
        CHECK(a.alpha == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    SUBCASE("common factor sharpens the best base") {
        std::vector<Rational> vals{Rational(2), Rational(4)};  // times ln 5
        RationalityReport rep = rationality_check_exact(vals, std::log(5.0));
        AlphaData a = alpha_from_rationals(rep);
        CHECK(a.alpha == doctest::Approx(1.0 / 25.0).epsilon(1e-12));
        CHECK(a.best_alpha == doctest::Approx(1.0 / 25.0).epsilon(1e-12));
        REQUIRE(a.exact_log_best.has_value());
        CHECK(*a.exact_log_best == Rational(2));
        // every value is an integer multiple of the best generator, exactly
        for (const auto& v : vals) {
            Rational m = v / *a.exact_log_best;
            CHECK(m.denominator() == 1);
        }
    }
}

TEST_CASE("classification verdicts") {
    SUBCASE("alternating couplings 1 and 2, float") {
        FactorClassification fc = classify(gen_ising(1.0, 2.0));
        CHECK(fc.verdict == FactorVerdict::TypeIIILambdaCandidate);
        CHECK(fc.generator == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fc.lambda == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
        CHECK(fc.stabilized);
        CHECK(fc.notes == kCandidateCaveat);
        REQUIRE(fc.window_generators.size() == 3);
        for (double g : fc.window_generators)
            CHECK(g == doctest::Approx(2.0).epsilon(1e-12));
    }

    SUBCASE("alternating couplings 1 and 2, exact") {
        FactorClassification fc = classify(gen_ising_exact(Rational(1), Rational(2)));
        CHECK(fc.verdict == FactorVerdict::TypeIIILambdaCandidate);
        REQUIRE(fc.exact_generator.has_value());
        CHECK(*fc.exact_generator == Rational(2));
        CHECK(fc.lambda == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
        CHECK(fc.stabilized);
    }

    SUBCASE("stochastic lifting with a power structure") {
        FactorClassification fc =
            classify(gen_markov_lifting({{2.0 / 3, 1.0 / 3}, {1.0 / 3, 2.0 / 3}}));
        CHECK(fc.verdict == FactorVerdict::TypeIIILambdaCandidate);
        CHECK(fc.lambda == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("irrational coupling ratio stays unclassified") {
        FactorClassification fc = classify(gen_ising(1.0, std::sqrt(2.0)));
        CHECK(fc.verdict == FactorVerdict::IndeterminateIrrational);
        REQUIRE(fc.witness.has_value());
        CHECK(fc.notes == kIndeterminateCaveat);
    }

    SUBCASE("zero couplings are tracial") {
        FactorClassification fc = classify(gen_ising(0.0, 0.0));
        CHECK(fc.verdict == FactorVerdict::Tracial);
        CHECK(fc.notes == kTracialNote);
    }

    SUBCASE("non-periodic specs are rejected") {
        InteractionSpec spec = gen_ising(1.0, 1.0);
        spec.periodic = false;
        spec.bonds.pop_back();
        CHECK_THROWS(classify(spec));
    }
}

TEST_CASE("scale covariance of the verdict") {
    FactorClassification base = classify(gen_ising_exact(Rational(1), Rational(2)));
    FactorClassification scaled =
        classify(gen_ising_exact(Rational(3, 2), Rational(3)));
    REQUIRE(base.verdict == FactorVerdict::TypeIIILambdaCandidate);
    REQUIRE(scaled.verdict == FactorVerdict::TypeIIILambdaCandidate);
    REQUIRE(base.exact_generator.has_value());
    REQUIRE(scaled.exact_generator.has_value());
    CHECK(*scaled.exact_generator == *base.exact_generator * Rational(3, 2));
}

TEST_CASE("tracial detection matches constant bond lists on generated data") {
    // constant eigenvalue lists across all blocks -> point spectrum
    InteractionSpec flat = gen_ising(0.0, 0.0);
    for (auto& bond : flat.bonds)
        for (auto& row : bond.block)
            for (auto& blk : row) blk.h(0, 0) = 0.7;
    Spectrum s = fundamental_spectrum(flat);
    CHECK(s.size() == 1);
    CHECK(classify(flat).verdict == FactorVerdict::Tracial);

    // distinct lists -> spread spectrum
    InteractionSpec spread = gen_ising(1.0, 1.0);
    Spectrum s2 = fundamental_spectrum(spread);
    CHECK(s2.size() > 1);
    CHECK(classify(spread).verdict != FactorVerdict::Tracial);
}

TEST_CASE("best base divides every window generator") {
    FactorClassification fc = classify(gen_ising_exact(Rational(1), Rational(2)));
    REQUIRE(fc.alpha.exact_log_best.has_value());
    for (double g : fc.window_generators) {
        double m = g / to_double(*fc.alpha.exact_log_best);
        CHECK(std::fabs(m - std::round(m)) < 1e-10);
    }
}
