#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace carnot {

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // unbiased sample variance
    int64_t n = 0;
};

MeanVar mean_var(std::span<const double> x);

// Empirical quantile of a sorted ascending sample (nearest-rank).
double quantile_sorted(std::span<const double> sorted, double q);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct QuadraticFit {
    double a = 0.0, b = 0.0, c = 0.0;  // y ~ a x^2 + b x + c
};

QuadraticFit quadratic_fit(std::span<const double> x, std::span<const double> y,
                           std::span<const double> w);

struct LinearFit {
    double intercept = 0.0, slope = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> w);

}  // namespace carnot
