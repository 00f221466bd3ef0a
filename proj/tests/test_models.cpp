#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qms/classify.hpp"
#include "qms/diagonalize.hpp"
#include "qms/models.hpp"

using namespace qms;

TEST_CASE("alternating-coupling generator") {
    InteractionSpec spec = gen_ising(0.4, -0.9);
    CHECK(validate_spec(spec).ok());
    CHECK(spec.period == 2);
    CHECK(spec.sites[0].dim == 2);

    // every sector one-dimensional, scalar bond entries J s s'
    for (int b = 0; b < 2; ++b) {
        const double j = (b == 0) ? 0.4 : -0.9;
        CHECK(spec.bonds[b].at(0, 0).h(0, 0).real() == doctest::Approx(j));
        CHECK(spec.bonds[b].at(0, 1).h(0, 0).real() == doctest::Approx(-j));
        CHECK(spec.bonds[b].at(1, 0).h(0, 0).real() == doctest::Approx(-j));
        CHECK(spec.bonds[b].at(1, 1).h(0, 0).real() == doctest::Approx(j));
    }
}

TEST_CASE("stochastic lifting generator") {
    SUBCASE("valid matrix") {
        InteractionSpec spec = gen_markov_lifting({{0.5, 0.5}, {0.25, 0.75}});
        CHECK(validate_spec(spec).ok());
        CHECK(spec.period == 1);
        CHECK(spec.sites[0].dim == 2);
        CHECK(spec.bonds[0].at(0, 1).h(0, 0).real() ==
              doctest::Approx(-std::log(0.5)));
    }

    SUBCASE("rejections") {
        CHECK_THROWS(gen_markov_lifting({{0.5, 0.5}, {0.5, 0.5}}));       // all equal
        CHECK_THROWS(gen_markov_lifting({{0.6, 0.5}, {0.25, 0.75}}));     // bad row sum
        CHECK_THROWS(gen_markov_lifting({{1.0, 0.0}, {0.25, 0.75}}));     // zero entry
        CHECK_THROWS(gen_markov_lifting({{1.0}}));                        // too small
    }

    SUBCASE("round trip through the extracted chain") {
        std::vector<std::vector<double>> p{{0.2, 0.3, 0.5},
                                           {0.4, 0.4, 0.2},
                                           {0.25, 0.25, 0.5}};
        InteractionSpec spec = gen_markov_lifting(p);
        SegmentContext ctx = segment_context(spec, make_segment(0, 2));
        SegmentState state(ctx);
        DiagonalAlgebraData data = build_diagonal_algebra(ctx);
        ClassicalMarkovChain chain = extract_markov_measure(state, data);
        const auto& tr = chain.transitions[0];
        for (size_t a = 0; a < chain.states[0].size(); ++a)
            for (size_t b = 0; b < chain.states[1].size(); ++b) {
                const auto& from = chain.states[0][a];
                const auto& to = chain.states[1][b];
                if (from.sr != to.sl) continue;
                CHECK(tr(a, b) == doctest::Approx(p[to.sl][to.sr]).epsilon(1e-12));
            }
    }
}

TEST_CASE("random spec generator") {
    SUBCASE("determinism of the full draw") {
        RandomSpecParams params;
        params.seed = 2024;
        params.lifting = true;
        InteractionSpec a = gen_random(params);
        InteractionSpec b = gen_random(params);
        REQUIRE(a.period == b.period);
        for (int r = 0; r < a.period; ++r) {
            CHECK(frobenius(a.sites[r].embedding - b.sites[r].embedding) == 0.0);
            for (size_t s = 0; s < a.sites[r].sectors.size(); ++s)
                CHECK(frobenius(a.sites[r].h[s] - b.sites[r].h[s]) == 0.0);
            for (size_t sl = 0; sl < a.bonds[r].block.size(); ++sl)
                for (size_t sr = 0; sr < a.bonds[r].block[sl].size(); ++sr)
                    CHECK(frobenius(a.bonds[r].at(static_cast<int>(sl), static_cast<int>(sr)).h -
                                    b.bonds[r].at(static_cast<int>(sl), static_cast<int>(sr)).h) ==
                          0.0);
        }
    }

    SUBCASE("validity and structural commutation across seeds") {
        for (std::uint64_t seed = 1; seed <= 6; ++seed) {
            RandomSpecParams params;
            params.seed = seed;
            params.lifting = (seed % 2 == 0);
            InteractionSpec spec = gen_random(params);
            CHECK(validate_spec(spec).ok());
            SegmentHamiltonian ham = assemble_operators(spec, make_segment(0, 2));
            CHECK(verify_commutation(ham) < 1e-12);
        }
    }

    SUBCASE("lifting preserves eigenvalue data and verdicts") {
        RandomSpecParams params;
        params.seed = 31415;
        params.pool = EigenvaluePool::Ln2;
        params.lifting = false;
        InteractionSpec plain = gen_random(params);
        params.lifting = true;
        InteractionSpec lifted = gen_random(params);

        // same sector structure and spectra
        REQUIRE(plain.period == lifted.period);
        for (int r = 0; r < plain.period; ++r) {
            Spectrum sp = bond_spectrum(plain, r);
            Spectrum sl = bond_spectrum(lifted, r);
            REQUIRE(sp.size() == sl.size());
            for (size_t i = 0; i < sp.size(); ++i) {
                CHECK(sp[i].value == doctest::Approx(sl[i].value).epsilon(1e-10));
                CHECK(sp[i].multiplicity == sl[i].multiplicity);
            }
        }

        // densities unitarily related: equal spectra of the segment states
        SegmentState st_p = segment_density(plain, make_segment(0, 2));
        SegmentState st_l = segment_density(lifted, make_segment(0, 2));
        HermEig ep = hermitian_eig(st_p.dense_density());
        HermEig el = hermitian_eig(st_l.dense_density());
        REQUIRE(ep.values.size() == el.values.size());
        for (int i = 0; i < ep.values.size(); ++i)
            CHECK(ep.values(i) == doctest::Approx(el.values(i)).epsilon(1e-10));

        // identical classification
        FactorClassification fp = classify(plain);
        FactorClassification fl = classify(lifted);
        CHECK(fp.verdict == fl.verdict);
        if (fp.verdict == FactorVerdict::TypeIIILambdaCandidate)
            CHECK(fp.lambda == doctest::Approx(fl.lambda).epsilon(1e-10));
    }

    SUBCASE("scalar-only partitions give commutative sector structure") {
        RandomSpecParams params;
        params.seed = 7;
        params.nontrivial_sectors = false;
        InteractionSpec spec = gen_random(params);
        for (const auto& site : spec.sites)
            for (const auto& sec : site.sectors) {
                CHECK(sec.n == 1);
                CHECK(sec.nbar == 1);
            }
        DiagonalizationRun run = run_diagonalization(spec, make_segment(0, 2));
        CHECK(run.theorem_deviation < 1e-12);
    }

    SUBCASE("full pipeline on a lifted seed") {
        RandomSpecParams params;
        params.seed = 7;
        params.lifting = true;
        params.max_site_dim = 4;
        params.period = 1;
        InteractionSpec spec = gen_random(params);
        DiagonalizationRun run = run_diagonalization(spec, make_segment(0, 3));
        CHECK(run.theorem_deviation < 1e-10);
        CHECK(run.markov_deviation < 1e-10);
        CHECK(run.certification_deviation < 1e-10);
    }

    SUBCASE("seed recorded in the spec") {
        RandomSpecParams params;
        params.seed = 99;
        InteractionSpec spec = gen_random(params);
        REQUIRE(spec.seed.has_value());
        CHECK(*spec.seed == 99);
    }
}
