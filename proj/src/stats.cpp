#include "carnot/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace carnot {

MeanVar mean_var(std::span<const double> x) {
    MeanVar r;
    r.n = static_cast<int64_t>(x.size());
    if (r.n == 0) return r;
    double s = 0.0;
    for (double v : x) s += v;
    r.mean = s / static_cast<double>(r.n);
    if (r.n < 2) return r;
    double ss = 0.0;
    for (double v : x) {
        const double dv = v - r.mean;
        ss += dv * dv;
    }
    r.var = ss / static_cast<double>(r.n - 1);
    return r;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    q = std::clamp(q, 0.0, 1.0);
    const auto idx = static_cast<size_t>(q * static_cast<double>(sorted.size() - 1) + 0.5);
    return sorted[std::min(idx, sorted.size() - 1)];
}

namespace {

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double va = a[ia], vb = b[ib];
        if (va <= vb) ++ia;
        if (vb <= va) ++ib;
        d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    KsResult r;
    r.statistic = d;
    r.p_value = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

QuadraticFit quadratic_fit(std::span<const double> x, std::span<const double> y,
                           std::span<const double> w) {
    const auto m = static_cast<Eigen::Index>(x.size());
    if (m < 3 || y.size() != x.size()) throw std::invalid_argument("quadratic_fit: need >= 3 points");
    Eigen::MatrixXd A(m, 3);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double wi = w.empty() ? 1.0 : std::sqrt(w[static_cast<size_t>(i)]);
        const double xi = x[static_cast<size_t>(i)];
        A(i, 0) = wi * xi * xi;
        A(i, 1) = wi * xi;
        A(i, 2) = wi;
        rhs(i) = wi * y[static_cast<size_t>(i)];
    }
    const Eigen::Vector3d c = A.colPivHouseholderQr().solve(rhs);
    return {c(0), c(1), c(2)};
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y,
                     std::span<const double> w) {
    const auto m = static_cast<Eigen::Index>(x.size());
    if (m < 2 || y.size() != x.size()) throw std::invalid_argument("linear_fit: need >= 2 points");
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double wi = w.empty() ? 1.0 : std::sqrt(w[static_cast<size_t>(i)]);
        A(i, 0) = wi;
        A(i, 1) = wi * x[static_cast<size_t>(i)];
        rhs(i) = wi * y[static_cast<size_t>(i)];
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(rhs);
    return {c(0), c(1)};
}

}  // namespace carnot
