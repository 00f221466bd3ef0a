#include "qms/rational.hpp"

#include <cmath>
#include <cstdlib>

namespace qms {

Rational parse_rational(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty rational literal");
    auto slash = text.find('/');
    auto parse_ll = [](const std::string& s) -> long long {
        size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("bad integer literal: " + s);
        return v;
    };
    if (slash == std::string::npos) return Rational(parse_ll(text));
    long long num = parse_ll(text.substr(0, slash));
    long long den = parse_ll(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator: " + text);
    return Rational(num, den);
}

std::string format_rational(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Rational rational_gcd(const Rational& a, const Rational& b) {
    if (a == Rational(0)) return boost::abs(b);
    if (b == Rational(0)) return boost::abs(a);
    long long num = std::gcd(std::llabs(a.numerator()), std::llabs(b.numerator()));
    long long den = std::lcm(a.denominator(), b.denominator());
    return Rational(num, den);
}

Rational rational_lattice_generator(const std::vector<Rational>& values) {
    Rational g(0);
    for (const auto& v : values) g = rational_gcd(g, v);
    return g;
}

BestRational best_rational_approx(double x, long long max_den) {
    if (max_den < 1) throw std::invalid_argument("max_den must be >= 1");
    const bool neg = x < 0;
    double y = std::fabs(x);

    // Continued-fraction walk; semiconvergents cover the bounded-denominator case.
    long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double frac = y;
    BestRational best{static_cast<long long>(std::llround(y)), 1,
                      std::fabs(y - static_cast<double>(std::llround(y)))};
    for (int iter = 0; iter < 64; ++iter) {
        double a_f = std::floor(frac);
        if (a_f > 1e15) break;
        long long a = static_cast<long long>(a_f);
        long long p2 = a * p1 + p0;
        long long q2 = a * q1 + q0;
        if (q2 > max_den) {
            // Largest semiconvergent still within the denominator bound.
            if (q1 > 0) {
                long long k = (max_den - q0) / q1;
                long long ps = k * p1 + p0;
                long long qs = k * q1 + q0;
                if (qs >= 1) {
                    double err = std::fabs(y - static_cast<double>(ps) / static_cast<double>(qs));
                    if (err < best.error) best = {ps, qs, err};
                }
            }
            break;
        }
        double err = std::fabs(y - static_cast<double>(p2) / static_cast<double>(q2));
        if (err < best.error) best = {p2, q2, err};
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        double rem = frac - a_f;
        if (rem < 1e-18) break;
        frac = 1.0 / rem;
    }
    if (neg) best.num = -best.num;
    return best;
}

}  // namespace qms
