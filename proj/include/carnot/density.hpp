#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "carnot/group.hpp"
#include "nlohmann/json.hpp"

namespace carnot {

// Monte Carlo draws of the log-signature U_t, one row of coordinates per
// sample, with the metadata needed to reproduce them.
struct LogSigSampleSet {
    double H = 0.5;
    double t = 1.0;
    int d = 2, N = 2, steps = 256;
    int64_t count = 0;
    uint64_t seed = 0;
    std::shared_ptr<const HallBasis> basis;
    Eigen::MatrixXd samples;  // count x n

    int n() const { return static_cast<int>(samples.cols()); }
};

int default_steps(double H);  // 256 for H >= 1/2, 1024 below

// i.i.d. draws of U_t: exact-law fBm on a uniform grid of [0,t],
// piecewise-linear lift, log-signature coordinates.
LogSigSampleSet mc_logsig_samples(double H, double t, int d, int N, int steps, int64_t count,
                                  uint64_t seed, int threads = 0);

// In-place dilation of every sample by Delta_eps; equals sampling the
// log-signature of the scaled driver eps * B.
void dilate_samples(LogSigSampleSet& S, double eps);

void write_samples_csv(const std::string& filename, const LogSigSampleSet& S);
void write_samples_bin(const std::string& filename, const LogSigSampleSet& S);
LogSigSampleSet read_samples_bin(const std::string& filename);

struct DensityEstimate {
    Eigen::VectorXd point;
    double value = 0.0;
    double stderr_ = 0.0;  // batch means, 16 batches
    Eigen::VectorXd bandwidth;
};

// Product-Gaussian KDE with per-coordinate bandwidth; empty bandwidth means
// the per-coordinate rule of thumb sigma_i * (4 / ((n+2) count))^(1/(n+4)).
DensityEstimate kde_density(const LogSigSampleSet& S, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& bandwidth = {}, int threads = 0);

Eigen::VectorXd auto_bandwidth(const LogSigSampleSet& S);

// Report of one empirical check: PASS flag, full JSON, and flat CSV rows
// (one per (t-or-eps, statistic)) ready for plotting.
struct CheckReport {
    std::string name;
    bool pass = false;
    nlohmann::ordered_json details;
    std::string csv_header;
    std::vector<std::string> csv_rows;
};

// t^(nu/2) p_t(Delta_{t^H} u) against p_1(u) at each point; PASS when all
// relative deviations stay below 15% and the 3-stderr intervals overlap.
CheckReport scaling_check(double H, const std::vector<double>& t_list,
                          const std::vector<Eigen::VectorXd>& points, int d, int N, int steps,
                          int64_t count, uint64_t seed, int threads = 0);

// Quadratic fit of log P(|||U_1||| > r) over an empirical-quantile r-grid;
// PASS when the r^2 coefficient is negative and dominates the linear term at
// the top of the range.
CheckReport tail_check(double H, int d, int N, int steps, int64_t count, uint64_t seed,
                       double quantile_lo = 0.5, double quantile_hi = 0.9999, int bins = 24,
                       int threads = 0);

// Floors of t^(nu/2) p_t over points with |||u||| <= t^H; PASS when the
// floors agree within a factor 3 across t and the t=1 estimates clear a
// 3-stderr positivity margin.
CheckReport local_lower_bound_check(double H, int d, int N, int steps,
                                    const std::vector<double>& t_list, int64_t count,
                                    int points_per_t, uint64_t seed, int threads = 0);

struct VaradhanOptions {
    std::vector<double> eps_list = {0.8, 0.6, 0.5, 0.4, 0.3};
    int grid_size = 32;
    int cc_segments = 48;
    int scan_samples = 6;
    int extrapolation_points = 3;  // smallest epsilons used for the fit
    double lambda = 0.0;           // nonzero: also check homogeneity at Delta_lambda u
    int threads = 0;
};

// eps^2 log p_eps(u) against the optimizer bracket [-dR^2/2, -d_low^2/2]
// (slack-widened); d and d_R upper bounds come from the distance module and
// d_low = c * |||u||| with c from a small equivalence scan.
CheckReport varadhan_check(const Eigen::VectorXd& u_coords, double H, int d, int N, int steps,
                           int64_t count, uint64_t seed, const VaradhanOptions& opts = {});

}  // namespace carnot
