#include "special_functions.hpp"

#include <cmath>

namespace bn2mf {

double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

double digamma(double x) {
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // psi(x) ~ ln x - 1/(2x) - sum_n B_2n / (2n x^2n); truncation error at
    // x >= 10 is below 5e-17 absolute.
    static const double coef[7] = {
        1.0 / 12.0,      -1.0 / 120.0,      1.0 / 252.0, -1.0 / 240.0,
        1.0 / 132.0,     -691.0 / 32760.0,  1.0 / 12.0,
    };
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double poly = coef[6];
    for (int i = 5; i >= 0; --i) poly = coef[i] + poly * inv2;
    return acc + std::log(x) - 0.5 * inv - inv2 * poly;
}

}  // namespace bn2mf
