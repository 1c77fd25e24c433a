#pragma once

#include <memory>
#include <span>

#include "carnot/group.hpp"
#include "carnot/pl_path.hpp"
#include "carnot/tensor.hpp"

namespace carnot {

// Signature of a straight segment with increment v: exp of v at level 1,
// so level k holds v^(x)k / k!.
TruncatedTensor sig_segment(const Eigen::VectorXd& v, int N);

// Chen product of segment signatures; grouplike, reparametrization invariant.
TruncatedTensor sig_pl_path(const PLPath& p, int N);

GroupElement log_sig_pl_path(const PLPath& p, std::shared_ptr<const HallBasis> basis);

// Independent route via the permutation-sum formula with descent-count
// coefficients; supported for N <= 3 (the k! sum).
GroupElement chen_strichartz_logsig(const PLPath& p, std::shared_ptr<const HallBasis> basis);

// Iterated integral of the word over the ordered simplex, computed by exact
// per-segment polynomial integration (no tensor arithmetic involved).
double iterated_integral_word(const PLPath& p, std::span<const int> word);

// Workspace for streaming signature accumulation over many increments,
// reusing buffers (used by the Monte Carlo driver).
class SignatureAccumulator {
public:
    SignatureAccumulator(int d, int N);
    void reset();
    void push_increment(const Eigen::VectorXd& v);
    void push_increment(const double* v);
    const TruncatedTensor& signature() const { return acc_; }

private:
    TruncatedTensor acc_, seg_, tmp_;
};

}  // namespace carnot
