#include "carnot/group.hpp"

#include <cmath>
#include <stdexcept>

namespace carnot {

namespace {

void check_same_basis(const GroupElement& u, const GroupElement& v) {
    if (!u.basis || !v.basis) throw std::invalid_argument("group element without basis");
    if (u.basis != v.basis && (u.basis->d() != v.basis->d() || u.basis->N() != v.basis->N()))
        throw std::invalid_argument("group elements over different bases");
}

}  // namespace

GroupElement group_identity(std::shared_ptr<const HallBasis> basis) {
    GroupElement g;
    g.coords = Eigen::VectorXd::Zero(basis->n());
    g.basis = std::move(basis);
    return g;
}

GroupElement make_group_element(std::shared_ptr<const HallBasis> basis, Eigen::VectorXd coords) {
    if (coords.size() != basis->n())
        throw std::invalid_argument("make_group_element: coordinate length mismatch");
    if (!coords.allFinite())
        throw std::invalid_argument("make_group_element: non-finite coordinates");
    GroupElement g;
    g.basis = std::move(basis);
    g.coords = std::move(coords);
    return g;
}

GroupElement group_mul(const GroupElement& u, const GroupElement& v) {
    check_same_basis(u, v);
    const TruncatedTensor a = tensor_exp(u.basis->expand(u.coords));
    const TruncatedTensor b = tensor_exp(v.basis->expand(v.coords));
    const TruncatedTensor z = tensor_log(tensor_mul(a, b));
    GroupElement out;
    out.basis = u.basis;
    out.coords = u.basis->project_checked(z);
    return out;
}

GroupElement group_inv(const GroupElement& u) {
    GroupElement out = u;
    out.coords = -u.coords;
    return out;
}

GroupElement dilate(double lambda, const GroupElement& u) {
    if (lambda < 0.0) throw std::invalid_argument("dilate: lambda must be >= 0");
    GroupElement out = u;
    for (int i = 0; i < u.n(); ++i)
        out.coords(i) = u.coords(i) * std::pow(lambda, u.layer(i));
    return out;
}

double homogeneous_norm(const GroupElement& u) {
    double m = 0.0;
    for (int i = 0; i < u.n(); ++i)
        m = std::max(m, std::pow(std::abs(u.coords(i)), 1.0 / u.layer(i)));
    return m;
}

Eigen::MatrixXd right_translation_jacobian(const GroupElement& x, const GroupElement& u,
                                           double fd_step) {
    check_same_basis(x, u);
    const int n = x.n();
    Eigen::MatrixXd jac(n, n);
    GroupElement xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
        xp.coords(j) = x.coords(j) + fd_step;
        xm.coords(j) = x.coords(j) - fd_step;
        const Eigen::VectorXd fp = group_mul(xp, u).coords;
        const Eigen::VectorXd fm = group_mul(xm, u).coords;
        jac.col(j) = (fp - fm) / (2.0 * fd_step);
        xp.coords(j) = x.coords(j);
        xm.coords(j) = x.coords(j);
    }
    return jac;
}

GroupElement group_from_tensor(const TruncatedTensor& x, std::shared_ptr<const HallBasis> basis) {
    if (x.d() != basis->d() || x.N() != basis->N())
        throw std::invalid_argument("group_from_tensor: shape mismatch");
    GroupElement out;
    out.coords = basis->project_checked(tensor_log(x));
    out.basis = std::move(basis);
    return out;
}

TruncatedTensor group_to_tensor(const GroupElement& u) {
    return tensor_exp(u.basis->expand(u.coords));
}

}  // namespace carnot
