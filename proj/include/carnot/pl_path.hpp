#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace carnot {

// Piecewise-linear path in R^d: breakpoints (times(j), values.row(j)),
// strictly increasing times, at least one segment.
struct PLPath {
    std::vector<double> times;
    Eigen::MatrixXd values;  // (m+1) x d

    int dim() const { return static_cast<int>(values.cols()); }
    int segments() const { return static_cast<int>(times.size()) - 1; }
    Eigen::VectorXd increment(int j) const { return values.row(j + 1) - values.row(j); }
    void validate() const;
};

PLPath make_pl_path(std::vector<double> times, Eigen::MatrixXd values);

// Straight path 0 -> v on [0,1].
PLPath segment_path(const Eigen::VectorXd& v);

// q translated to start where p ends; times continue after p.
PLPath concat_paths(const PLPath& p, const PLPath& q);

// CSV with header t,x1,...,xd; numbers at full precision.
PLPath read_pl_path_csv(const std::string& filename);
void write_pl_path_csv(const std::string& filename, const PLPath& p);

}  // namespace carnot
