#ifndef RBE2D_SPECIAL_FUNCTIONS_HPP
#define RBE2D_SPECIAL_FUNCTIONS_HPP

#include <cmath>

namespace rbe2d {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtPi = 1.77245385090551602730;
inline constexpr double kTwoOverSqrtPi = 1.12837916709551257390;

/// erfc with tiny values flushed to zero.
inline double erfc_flushed(double x)
{
    const double v = std::erfc(x);
    return v < 1e-300 ? 0.0 : v;
}

/// Scaled complementary error function exp(x^2) erfc(x), for x >= 0.
inline double erfcx(double x)
{
    if (x < 10.0)
        return std::exp(x * x) * std::erfc(x);
    // Continued fraction, evaluated backwards; 40 levels is exact to rounding for x >= 10.
    double t = x;
    for (int n = 40; n >= 1; --n)
        t = x + 0.5 * n / t;
    return 1.0 / (kSqrtPi * t);
}

/// exp(a) * erfc(u) without intermediate overflow when a is large and u > 0.
/// Caller guarantees a - u^2 does not overflow (true for the Ewald kernels).
inline double exp_erfc(double a, double u)
{
    if (u > 0.0)
        return std::exp(a - u * u) * erfcx(u);
    return std::exp(a) * std::erfc(u);
}

/// Two-dimensional Ewald kernel G(h, z) = e^{hz} erfc(h/2a + a z) + e^{-hz} erfc(h/2a - a z).
inline double ewald2d_kernel(double h, double z, double alpha)
{
    const double w = h / (2.0 * alpha);
    return exp_erfc(h * z, w + alpha * z) + exp_erfc(-h * z, w - alpha * z);
}

/// Zero-mode kernel z erf(a z) + exp(-a^2 z^2) / (a sqrt(pi)).
inline double ewald2d_zero_mode(double z, double alpha)
{
    return z * std::erf(alpha * z) + std::exp(-alpha * alpha * z * z) / (alpha * kSqrtPi);
}

}  // namespace rbe2d

#endif
