#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qms/rational.hpp"

using namespace qms;

TEST_CASE("rational parsing and formatting") {
    CHECK(parse_rational("2/3") == Rational(2, 3));
    CHECK(parse_rational("-5") == Rational(-5));
    CHECK(parse_rational("-4/6") == Rational(-2, 3));
    CHECK(format_rational(Rational(2, 4)) == "1/2");
    CHECK(format_rational(Rational(7)) == "7");
    CHECK_THROWS(parse_rational("1/0"));
    CHECK_THROWS(parse_rational("abc"));
    CHECK_THROWS(parse_rational(""));
}

TEST_CASE("rational gcd and lattice generator") {
    CHECK(rational_gcd(Rational(1, 2), Rational(1, 3)) == Rational(1, 6));
    CHECK(rational_gcd(Rational(4), Rational(6)) == Rational(2));
    CHECK(rational_gcd(Rational(0), Rational(-3, 7)) == Rational(3, 7));
    CHECK(rational_lattice_generator({Rational(2), Rational(4)}) == Rational(2));
    CHECK(rational_lattice_generator({Rational(2, 3), Rational(1, 2)}) == Rational(1, 6));
    CHECK(rational_lattice_generator({}) == Rational(0));
}

TEST_CASE("best rational approximation") {
    auto r = best_rational_approx(2.0 / 3.0, 64);
    CHECK(r.num == 2);
    CHECK(r.den == 3);
    CHECK(r.error < 1e-15);

    r = best_rational_approx(-0.25, 64);
    CHECK(r.num == -1);
    CHECK(r.den == 4);

    // sqrt(2) admits no close rational with a small denominator
    r = best_rational_approx(std::sqrt(2.0), 64);
    CHECK(r.error > 1e-9);

    r = best_rational_approx(3.0, 64);
    CHECK(r.num == 3);
    CHECK(r.den == 1);

    // golden ratio: worst case for rational approximation
    double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    r = best_rational_approx(phi, 64);
    CHECK(std::fabs(phi - double(r.num) / double(r.den)) < 1e-3);
    CHECK(r.error > 1e-9);
}
