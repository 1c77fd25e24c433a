#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "carnot/cameron_martin.hpp"
#include "carnot/group.hpp"
#include "carnot/pl_path.hpp"

namespace carnot {

// Amplitudes for a product of one-letter exponentials hitting a target
// group element.
struct SecondKindSolve {
    std::vector<int> letters;
    Eigen::VectorXd amplitudes;
    double residual = 0.0;     // Euclidean mismatch in log coordinates
    int jacobian_rank = 0;     // rank of the endpoint map at the solution
    bool converged = false;
};

struct SolveOptions {
    uint64_t seed = 1;
    int multistarts = 8;
    int max_iters = 80;
    double tol_scale = 1e-8;  // accept when residual <= tol_scale * (1 + |||g|||)
};

// Solves prod_j exp(s_j e_{i_j}) = g over a cyclic letter sequence of length
// >= n + d (extended until the endpoint Jacobian has full rank), by damped
// Gauss-Newton with multi-starts.
SecondKindSolve second_kind_solve(const GroupElement& g, const SolveOptions& opts = {},
                                  const std::vector<int>* letters_override = nullptr);

// Piecewise-linear path realizing g: log_sig_pl_path(chow_path(g)) = g up to
// the solver residual.
PLPath chow_path(const GroupElement& g, const SolveOptions& opts = {});

enum class DistanceKind { cc_upper, d_value, dR_value };

struct DistanceEstimate {
    double value = 0.0;
    DistanceKind kind = DistanceKind::cc_upper;
    PLPath certificate;       // feasible path (control) backing the upper bound
    double residual = 0.0;    // homogeneous-norm endpoint mismatch
    bool nondegenerate = true;  // meaningful for dR_value
    bool converged = false;
    double min_singular_value = 0.0;  // endpoint Jacobian, scaled rows
    int jacobian_rank = 0;            // singular values above the rank threshold
};

struct PenaltyOptions {
    uint64_t seed = 1;
    int multistarts = 8;
    std::vector<double> mu_schedule = {1e2, 1e3, 1e4, 1e5, 1e6, 1e7};
    double fd_step = 1e-5;
    double residual_tol = 1e-6;  // in homogeneous-norm units, relative to max(1, |||g|||)
    int max_iters_per_stage = 120;
    int threads = 0;
    double rank_sv_tol = 1e-6;   // dR nondegeneracy threshold after row scaling
};

// Upper bound for the Carnot-Caratheodory norm: minimal length of a
// piecewise-linear horizontal path with endpoint signature g (energy
// minimization with quadratic penalty, continuation and multi-start,
// followed by feasibility restoration).
DistanceEstimate cc_norm_estimate(const GroupElement& g, int segments,
                                  const PenaltyOptions& opts = {});

enum class DistanceMode { d, dR };

// Upper bound for the controlling distance: minimal discrete Cameron-Martin
// norm of a grid control whose PL interpolant has log-signature u. dR mode
// additionally certifies the endpoint map rank at the optimum; its candidate
// set is the d-mode candidate set filtered by that certificate, so
// d <= dR holds structurally on identical settings.
DistanceEstimate controlling_distance(const GroupElement& u, double H, int grid_size,
                                      DistanceMode mode, const PenaltyOptions& opts = {});

struct ScanSample {
    Eigen::VectorXd u;
    double d_value = 0.0;
    double dR_value = 0.0;
    double cc_value = 0.0;
    double d_residual = 0.0;
    int d_rank = 0;  // endpoint-map rank at the d-mode optimum
    bool d_converged = false;
    bool dR_converged = false;
    bool cc_converged = false;
    bool dR_nondegenerate = false;
    double dilation_ratio = 0.0;  // d(Delta_lambda u) / (lambda d(u)), 0 if not checked
    PLPath d_certificate;
};

struct ScanReport {
    double H = 0.5;
    int d = 2, N = 2;
    double ratio_min = 0.0, ratio_max = 0.0;  // d(u) over the unit homogeneous sphere
    double cc_ratio_min = 0.0, cc_ratio_max = 0.0;
    bool all_converged = false;
    std::vector<ScanSample> samples;
};

// Samples the unit homogeneous sphere, reports d / dR / cc upper bounds and
// the empirical equivalence ratios.
ScanReport distance_equivalence_scan(std::shared_ptr<const HallBasis> basis, double H,
                                     int samples, int grid_size, int cc_segments,
                                     uint64_t seed, const PenaltyOptions& opts = {},
                                     int dilation_checks = 0, double lambda = 2.0);

}  // namespace carnot
