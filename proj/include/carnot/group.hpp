#pragma once

#include <Eigen/Dense>
#include <memory>

#include "carnot/lyndon.hpp"
#include "carnot/tensor.hpp"

namespace carnot {

// Point of the free Carnot group in exponential coordinates over a Hall
// basis: coords(i) sits in the layer given by the degree of basis element i.
struct GroupElement {
    std::shared_ptr<const HallBasis> basis;
    Eigen::VectorXd coords;

    int n() const { return static_cast<int>(coords.size()); }
    int layer(int i) const { return basis->degree(i); }
    bool is_identity(double tol = 0.0) const { return coords.lpNorm<Eigen::Infinity>() <= tol; }
};

GroupElement group_identity(std::shared_ptr<const HallBasis> basis);
GroupElement make_group_element(std::shared_ptr<const HallBasis> basis, Eigen::VectorXd coords);

// Group law through the tensor chart: log(exp(u) (x) exp(v)) projected back.
GroupElement group_mul(const GroupElement& u, const GroupElement& v);

// Inverse is negation in exponential coordinates of the first kind.
GroupElement group_inv(const GroupElement& u);

// Dilation: coordinate of layer k scales by lambda^k. Requires lambda >= 0.
GroupElement dilate(double lambda, const GroupElement& u);

// max_i |u_i|^(1/k_i); homogeneous of degree 1 under dilations.
double homogeneous_norm(const GroupElement& u);

// J = d(x * u)/dx by central finite differences (step 1e-5 per coordinate).
Eigen::MatrixXd right_translation_jacobian(const GroupElement& x, const GroupElement& u,
                                           double fd_step = 1e-5);

GroupElement group_from_tensor(const TruncatedTensor& x, std::shared_ptr<const HallBasis> basis);
TruncatedTensor group_to_tensor(const GroupElement& u);

}  // namespace carnot
