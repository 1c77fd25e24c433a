#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace carnot {

// Grid restriction of a Cameron-Martin path: values at times 0 < t_1 < ... <= T,
// with h(0) = 0 implicit. values is m x d.
struct GridFunction {
    std::vector<double> times;
    Eigen::MatrixXd values;
    double H = 0.5;

    int dim() const { return static_cast<int>(values.cols()); }
    int size() const { return static_cast<int>(times.size()); }
    double T() const { return times.back(); }
    void validate() const;
};

GridFunction make_grid_function(std::vector<double> times, Eigen::MatrixXd values, double H);

// Covariance Gram matrix G_jk = R(t_j, t_k).
Eigen::MatrixXd cm_gram(const std::vector<double>& grid, double H);

// Factorization with diagnostics; adds diagonal jitter 1e-12 * trace/m when
// the plain factorization fails.
struct GramFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool jittered = false;
    double jitter = 0.0;
};
GramFactor cm_gram_factor(const std::vector<double>& grid, double H);

// Process-wide read-mostly cache of factorizations keyed by (grid, H).
const GramFactor& cm_gram_factor_cached(const std::vector<double>& grid, double H);

// Discrete Cameron-Martin norm sqrt(sum_c h_c' G^{-1} h_c): the norm of the
// minimal-norm interpolant of the grid values, a lower bound of the continuum
// norm that is nondecreasing under grid refinement.
double cm_norm_discrete(const GridFunction& h);
double cm_norm_discrete(const GridFunction& h, const GramFactor& factor);

// h1 followed by h2 translated to continue from h1's endpoint.
GridFunction concat_grid_paths(const GridFunction& h1, const GridFunction& h2);

// Norms of h on [0,T1] and of t -> h(T1 t / T2) on [0,T2]; the ratio
// after/before equals (T1/T2)^H by 2H-homogeneity of the covariance.
std::pair<double, double> rescale_check(const GridFunction& h, double T2);

// Same CSV layout as a PLPath (header t,x1,...,xd), with the implicit
// origin written as the first row.
void write_grid_function_csv(const std::string& filename, const GridFunction& h);
GridFunction read_grid_function_csv(const std::string& filename, double H);

}  // namespace carnot
