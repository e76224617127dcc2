#pragma once

#include <cmath>

namespace ddspec {

// First zero of J0; coherence changes sign when a Bessel argument crosses it.
inline constexpr double kJ0FirstZero = 2.404825557695773;

// Integer-order Bessel function of the first kind with the reflections
// J_{-n}(x) = (-1)^n J_n(x) and J_n(-x) = (-1)^n J_n(x).
inline double bessel_j(int order, double x) {
    double sign = 1.0;
    if (order < 0) {
        order = -order;
        if (order & 1) sign = -sign;
    }
    if (x < 0.0) {
        x = -x;
        if (order & 1) sign = -sign;
    }
    return sign * std::cyl_bessel_j(static_cast<double>(order), x);
}

inline double bessel_j0(double x) { return std::cyl_bessel_j(0.0, std::fabs(x)); }

inline double bessel_j1(double x) { return bessel_j(1, x); }

}  // namespace ddspec
