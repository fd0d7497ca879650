#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

namespace alf::stats {

/// Pearson correlation of two equally long streams.
///
/// Single pass over updating co-moments, so long streams of nearly constant
/// predictions do not lose precision. Returns nullopt when fewer than two
/// samples are given or either stream has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("correlated streams must have equal length");
    if (x.size() < 2)
        return std::nullopt;
    double mean_x = 0.0, mean_y = 0.0, m2x = 0.0, m2y = 0.0, cxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double n = static_cast<double>(i + 1);
        double dx = x[i] - mean_x;
        double dy = y[i] - mean_y;
        mean_x += dx / n;
        mean_y += dy / n;
        m2x += dx * (x[i] - mean_x);
        m2y += dy * (y[i] - mean_y);
        cxy += dx * (y[i] - mean_y);
    }
    if (!(m2x > 0.0) || !(m2y > 0.0))
        return std::nullopt;
    double r = cxy / (std::sqrt(m2x) * std::sqrt(m2y));
    return std::fmax(-1.0, std::fmin(1.0, r));
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x)
{
    constexpr int max_iter = 300;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny)
        d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps)
            break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x)
{
    if (a <= 0.0 || b <= 0.0)
        throw std::invalid_argument("incomplete beta needs positive shape parameters");
    if (x <= 0.0)
        return 0.0;
    if (x >= 1.0)
        return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Student t cumulative distribution function.
inline double student_t_cdf(double t, double df)
{
    if (!(df > 0.0))
        throw std::invalid_argument("degrees of freedom must be positive");
    if (std::isinf(t))
        return t > 0 ? 1.0 : 0.0;
    double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t > 0.0 ? 1.0 - tail : tail;
}

/// Smallest t with P(T <= t) >= confidence, found by bisection on the CDF.
inline double student_t_critical(double confidence, double df)
{
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("confidence must lie in (0, 1)");
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, df) > confidence)
        lo *= 2.0;
    while (student_t_cdf(hi, df) < confidence)
        hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-13 * std::fmax(1.0, std::fabs(hi)); ++i) {
        double mid = 0.5 * (lo + hi);
        (student_t_cdf(mid, df) < confidence ? lo : hi) = mid;
    }
    return hi;
}

/// t statistic of a correlation coefficient over n samples.
inline double correlation_t(double rho, std::size_t n)
{
    if (n < 3)
        throw std::invalid_argument("correlation t statistic needs at least three samples");
    double denom = 1.0 - rho * rho;
    if (denom <= 0.0)
        return rho > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    return rho * std::sqrt(static_cast<double>(n - 2) / denom);
}

/// One-sided test for positive correlation at the given confidence level.
inline bool positively_correlated(double rho, std::size_t n, double confidence)
{
    if (n < 3)
        return false;
    return student_t_cdf(correlation_t(rho, n), static_cast<double>(n - 2)) >= confidence;
}

}  // namespace alf::stats
