#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qms {

using Rational = boost::rational<long long>;

inline double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Parses "p", "-p" or "p/q"; also plain decimal integers. Throws on anything else.
Rational parse_rational(const std::string& text);

std::string format_rational(const Rational& r);

// gcd of two nonnegative rationals: gcd(a/b, c/d) = gcd(a,c)/lcm(b,d) in lowest terms.
Rational rational_gcd(const Rational& a, const Rational& b);

// Generator of the additive group spanned by the values (all taken |.|); 0 for empty input.
Rational rational_lattice_generator(const std::vector<Rational>& values);

struct BestRational {
    long long num = 0;
    long long den = 1;
    double error = 0.0;
};

// Best rational approximation p/q of x with q <= max_den (continued fractions,
// semiconvergents included).
BestRational best_rational_approx(double x, long long max_den);

}  // namespace qms
