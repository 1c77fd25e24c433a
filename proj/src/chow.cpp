#include "carnot/chow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "carnot/fbm.hpp"
#include "carnot/optim.hpp"
#include "carnot/parallel.hpp"
#include "carnot/rng.hpp"
#include "carnot/signature.hpp"

namespace carnot {

namespace {

// Endpoint map of a one-letter-exponential product, in log coordinates.
Eigen::VectorXd letter_product_coords(const HallBasis& basis, const std::vector<int>& letters,
                                      const Eigen::VectorXd& s) {
    SignatureAccumulator acc(basis.d(), basis.N());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(basis.d());
    for (size_t j = 0; j < letters.size(); ++j) {
        v.setZero();
        v(letters[j] - 1) = s(static_cast<Eigen::Index>(j));
        acc.push_increment(v.data());
    }
    double residual = 0.0;
    return basis.project(tensor_log(acc.signature()), &residual);
}

std::vector<int> cyclic_letters(int d, int len) {
    std::vector<int> letters(static_cast<size_t>(len));
    for (int j = 0; j < len; ++j) letters[static_cast<size_t>(j)] = 1 + (j % d);
    return letters;
}

int matrix_rank(const Eigen::MatrixXd& J, double rel_tol = 1e-10) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * std::max(1.0, sv(0))) ++rank;
    return rank;
}

}  // namespace

SecondKindSolve second_kind_solve(const GroupElement& g, const SolveOptions& opts,
                                  const std::vector<int>* letters_override) {
    const HallBasis& basis = *g.basis;
    const int n = basis.n();
    const int d = basis.d();
    const double tol = opts.tol_scale * (1.0 + homogeneous_norm(g));

    std::vector<int> letters;
    if (letters_override) {
        letters = *letters_override;
        for (int l : letters)
            if (l < 1 || l > d) throw std::invalid_argument("second_kind_solve: bad letter");
    } else {
        int len = n + d;
        if (len % d != 0) len += d - (len % d);
        letters = cyclic_letters(d, len);
        // Extend until the endpoint map is a submersion at a generic point.
        RngStream probe_rng(opts.seed, 0xC0FFEEULL);
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::VectorXd s(static_cast<Eigen::Index>(letters.size()));
            for (Eigen::Index j = 0; j < s.size(); ++j) s(j) = probe_rng.normal();
            auto F = [&](const Eigen::VectorXd& x) { return letter_product_coords(basis, letters, x); };
            const Eigen::MatrixXd J = central_diff_jacobian(F, s, 1e-5);
            if (matrix_rank(J) == n) break;
            for (int j = 0; j < d; ++j) letters.push_back(1 + j);
        }
    }

    const auto m = static_cast<Eigen::Index>(letters.size());
    auto residual_fn = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
        return letter_product_coords(basis, letters, s) - g.coords;
    };

    SecondKindSolve best;
    best.letters = letters;
    best.residual = std::numeric_limits<double>::infinity();
    const double scale = std::max(1.0, homogeneous_norm(g));
    GaussNewtonOptions gn;
    gn.max_iters = opts.max_iters;
    gn.residual_tol = tol * 0.1;
    for (int start = 0; start < opts.multistarts; ++start) {
        RngStream rng(opts.seed, 0x5ECD0ULL, static_cast<uint64_t>(start));
        Eigen::VectorXd s0(m);
        const double spread = (start == 0) ? 0.1 : 0.5 * scale;
        for (Eigen::Index j = 0; j < m; ++j) s0(j) = spread * rng.normal();
        const GaussNewtonResult r = gauss_newton_least_squares(residual_fn, s0, gn);
        if (r.residual_norm < best.residual) {
            best.amplitudes = r.x;
            best.residual = r.residual_norm;
            best.jacobian_rank = matrix_rank(r.jacobian);
            best.converged = r.residual_norm <= tol;
        }
        if (best.converged && best.jacobian_rank == n) break;
    }
    if (!best.converged) {
        // Report the best attempt; callers decide whether to treat it as fatal.
        return best;
    }
    return best;
}

PLPath chow_path(const GroupElement& g, const SolveOptions& opts) {
    if (homogeneous_norm(g) == 0.0) {
        PLPath p;
        p.times = {0.0, 1.0};
        p.values.setZero(2, g.basis->d());
        return p;
    }
    const SecondKindSolve sol = second_kind_solve(g, opts);
    if (!sol.converged)
        throw std::runtime_error("chow_path: amplitude solve did not converge (best residual " +
                                 std::to_string(sol.residual) + ")");
    const int m = static_cast<int>(sol.letters.size());
    PLPath p;
    p.times.resize(static_cast<size_t>(m) + 1);
    p.values.setZero(m + 1, g.basis->d());
    for (int j = 0; j <= m; ++j) p.times[static_cast<size_t>(j)] = static_cast<double>(j) / m;
    for (int j = 0; j < m; ++j) {
        p.values.row(j + 1) = p.values.row(j);
        p.values(j + 1, sol.letters[static_cast<size_t>(j)] - 1) += sol.amplitudes(j);
    }
    return p;
}

namespace {

// Shared machinery of the penalty optimizers. Variables are flattened
// increments (cc) or node values (controlling distance); `coords_of` maps
// them to log coordinates of the associated PL path.
struct PenaltyProblem {
    const HallBasis* basis = nullptr;
    Eigen::VectorXd target;
    Eigen::VectorXd layer_weight;  // per-coordinate penalty scaling
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> coords_of;
    std::function<double(const Eigen::VectorXd&)> smooth_cost;  // energy or CM norm squared

    Eigen::VectorXd mismatch(const Eigen::VectorXd& x) const {
        Eigen::VectorXd m = coords_of(x) - target;
        m.array() *= layer_weight.array();
        return m;
    }
    double penalized(const Eigen::VectorXd& x, double mu) const {
        return smooth_cost(x) + mu * mismatch(x).squaredNorm();
    }
};

Eigen::VectorXd layer_weights(const HallBasis& basis, const Eigen::VectorXd& target_coords) {
    // homogeneous size of the target controls the per-layer scale
    double s = 0.0;
    for (int i = 0; i < basis.n(); ++i)
        s = std::max(s, std::pow(std::abs(target_coords(i)), 1.0 / basis.degree(i)));
    const double base = std::max(1.0, s);
    Eigen::VectorXd w(basis.n());
    for (int i = 0; i < basis.n(); ++i) w(i) = std::pow(base, -basis.degree(i));
    return w;
}

struct StartResult {
    Eigen::VectorXd x;
    double cost = std::numeric_limits<double>::infinity();
    double mismatch_norm = std::numeric_limits<double>::infinity();
    bool restored = false;
};

StartResult run_one_start(const PenaltyProblem& prob, Eigen::VectorXd x0,
                          const PenaltyOptions& opts) {
    LbfgsOptions lopts;
    lopts.max_iters = opts.max_iters_per_stage;
    lopts.fd_step = opts.fd_step;
    lopts.grad_tol = 1e-7;
    Eigen::VectorXd x = std::move(x0);
    for (double mu : opts.mu_schedule) {
        auto f = [&](const Eigen::VectorXd& y) { return prob.penalized(y, mu); };
        x = lbfgs_minimize(f, std::move(x), lopts).x;
    }
    // Feasibility restoration: push the endpoint mismatch to (near) zero with
    // a minimal-norm correction.
    GaussNewtonOptions gn;
    gn.max_iters = 40;
    gn.residual_tol = 1e-12;
    gn.fd_step = opts.fd_step;
    auto F = [&](const Eigen::VectorXd& y) { return prob.mismatch(y); };
    GaussNewtonResult r = gauss_newton_least_squares(F, x, gn);
    StartResult out;
    out.x = std::move(r.x);
    out.mismatch_norm = r.residual_norm;
    out.cost = prob.smooth_cost(out.x);
    out.restored = r.residual_norm < 1e-8;
    return out;
}

// Deterministic multi-start driver: all starts run (in parallel), winner by
// (restored, cost, mismatch, start index).
StartResult run_multistart(const PenaltyProblem& prob,
                           const std::function<Eigen::VectorXd(int)>& make_start,
                           const PenaltyOptions& opts) {
    std::vector<StartResult> results(static_cast<size_t>(opts.multistarts));
    parallel_chunks(opts.multistarts, 1, opts.threads, [&](int64_t, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i)
            results[static_cast<size_t>(i)] = run_one_start(prob, make_start(static_cast<int>(i)), opts);
    });
    int best = 0;
    for (int i = 1; i < opts.multistarts; ++i) {
        const auto& a = results[static_cast<size_t>(i)];
        const auto& c = results[static_cast<size_t>(best)];
        const bool better = (a.restored != c.restored) ? a.restored
                          : (a.cost != c.cost)         ? a.cost < c.cost
                                                       : a.mismatch_norm < c.mismatch_norm;
        if (better) best = i;
    }
    return results[static_cast<size_t>(best)];
}

PLPath path_from_increments(const Eigen::VectorXd& x, int segments, int d) {
    PLPath p;
    p.times.resize(static_cast<size_t>(segments) + 1);
    p.values.setZero(segments + 1, d);
    for (int j = 0; j <= segments; ++j) p.times[static_cast<size_t>(j)] = static_cast<double>(j) / segments;
    for (int j = 0; j < segments; ++j)
        for (int c = 0; c < d; ++c)
            p.values(j + 1, c) = p.values(j, c) + x(j * d + c);
    return p;
}

double homogeneous_residual(const GroupElement& target, const Eigen::VectorXd& reached_coords) {
    GroupElement reached;
    reached.basis = target.basis;
    reached.coords = reached_coords;
    return homogeneous_norm(group_mul(group_inv(target), reached));
}

// Evaluates a PL path (normalized to [0,1]) at uniform grid times.
Eigen::MatrixXd resample_path_nodes(const PLPath& path, int grid_size) {
    const double t0 = path.times.front();
    const double span = path.times.back() - t0;
    Eigen::MatrixXd nodes(grid_size, path.dim());
    size_t seg = 0;
    for (int j = 0; j < grid_size; ++j) {
        const double t = t0 + span * static_cast<double>(j + 1) / grid_size;
        while (seg + 2 < path.times.size() && path.times[seg + 1] < t) ++seg;
        const double a = path.times[seg], b = path.times[seg + 1];
        const double w = (t - a) / (b - a);
        nodes.row(j) = (1.0 - w) * path.values.row(static_cast<Eigen::Index>(seg)) +
                       w * path.values.row(static_cast<Eigen::Index>(seg) + 1);
    }
    return nodes;
}

}  // namespace

DistanceEstimate cc_norm_estimate(const GroupElement& g, int segments, const PenaltyOptions& opts) {
    const HallBasis& basis = *g.basis;
    const int d = basis.d();
    if (segments < basis.n())
        throw std::invalid_argument("cc_norm_estimate: need segments >= n");

    DistanceEstimate est;
    est.kind = DistanceKind::cc_upper;
    if (homogeneous_norm(g) == 0.0) {
        est.certificate = path_from_increments(Eigen::VectorXd::Zero(segments * d), segments, d);
        est.converged = true;
        return est;
    }

    PenaltyProblem prob;
    prob.basis = &basis;
    prob.target = g.coords;
    prob.layer_weight = layer_weights(basis, g.coords);
    prob.coords_of = [&basis, segments, d](const Eigen::VectorXd& x) {
        SignatureAccumulator acc(basis.d(), basis.N());
        for (int j = 0; j < segments; ++j) acc.push_increment(x.data() + j * d);
        double res = 0.0;
        return basis.project(tensor_log(acc.signature()), &res);
    };
    // Kinetic energy of the uniform-time parametrization; its square root
    // dominates the path length, with equality at constant speed.
    prob.smooth_cost = [segments](const Eigen::VectorXd& x) {
        return static_cast<double>(segments) * x.squaredNorm();
    };

    // Starts: the Chow certificate resampled onto the segment grid, then
    // randomized straight-line-plus-noise guesses.
    Eigen::VectorXd chow_increments;
    {
        SolveOptions sopts;
        sopts.seed = splitmix64(opts.seed ^ 0x11CCULL);
        try {
            const PLPath cp = chow_path(g, sopts);
            const Eigen::MatrixXd nodes = resample_path_nodes(cp, segments);
            chow_increments.resize(segments * d);
            Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(d);
            for (int j = 0; j < segments; ++j) {
                for (int c = 0; c < d; ++c) chow_increments(j * d + c) = nodes(j, c) - prev(c);
                prev = nodes.row(j);
            }
        } catch (const std::exception&) {
            chow_increments.resize(0);
        }
    }
    const Eigen::VectorXd first_layer = g.coords.head(d);
    const double scale = std::max(homogeneous_norm(g), 1e-6);
    auto make_start = [&](int idx) -> Eigen::VectorXd {
        if (idx == 0 && chow_increments.size() > 0) return chow_increments;
        RngStream rng(opts.seed, 0xCC00ULL, static_cast<uint64_t>(idx));
        Eigen::VectorXd x(segments * d);
        for (int j = 0; j < segments; ++j)
            for (int c = 0; c < d; ++c)
                x(j * d + c) = first_layer(c) / segments + 2.0 * scale / segments * rng.normal();
        return x;
    };

    const StartResult win = run_multistart(prob, make_start, opts);
    est.certificate = path_from_increments(win.x, segments, d);
    double sum_len = 0.0;
    for (int j = 0; j < segments; ++j) sum_len += win.x.segment(j * d, d).norm();
    est.value = sum_len;
    est.residual = homogeneous_residual(g, prob.coords_of(win.x));
    est.converged = win.restored &&
                    est.residual <= opts.residual_tol * std::max(1.0, homogeneous_norm(g));
    return est;
}

namespace {

struct ControlCandidate {
    StartResult start;
    double min_sv = 0.0;
    int rank = 0;
    bool nondegenerate = false;
};

}  // namespace

DistanceEstimate controlling_distance(const GroupElement& u, double H, int grid_size,
                                      DistanceMode mode, const PenaltyOptions& opts) {
    const HallBasis& basis = *u.basis;
    const int d = basis.d();
    const int n = basis.n();
    if (!(H > 0.25 && H < 1.0))
        throw std::invalid_argument("controlling_distance: H must be in (1/4, 1)");
    if (grid_size < n) throw std::invalid_argument("controlling_distance: need grid_size >= n");

    DistanceEstimate est;
    est.kind = (mode == DistanceMode::d) ? DistanceKind::d_value : DistanceKind::dR_value;
    const std::vector<double> grid = uniform_grid(grid_size, 1.0);
    if (homogeneous_norm(u) == 0.0) {
        est.certificate = path_from_increments(Eigen::VectorXd::Zero(grid_size * d), grid_size, d);
        est.converged = true;
        return est;
    }

    const Eigen::MatrixXd gram_inv =
        cm_gram_factor(grid, H).llt.solve(Eigen::MatrixXd::Identity(grid_size, grid_size));

    PenaltyProblem prob;
    prob.basis = &basis;
    prob.target = u.coords;
    prob.layer_weight = layer_weights(basis, u.coords);
    prob.coords_of = [&basis, grid_size, d](const Eigen::VectorXd& x) {
        SignatureAccumulator acc(basis.d(), basis.N());
        Eigen::VectorXd v(d);
        Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(d);
        for (int j = 0; j < grid_size; ++j) {
            for (int c = 0; c < d; ++c) {
                v(c) = x(j * d + c) - prev(c);
                prev(c) = x(j * d + c);
            }
            acc.push_increment(v.data());
        }
        double res = 0.0;
        return basis.project(tensor_log(acc.signature()), &res);
    };
    prob.smooth_cost = [&gram_inv, grid_size, d](const Eigen::VectorXd& x) {
        double sq = 0.0;
        for (int c = 0; c < d; ++c) {
            Eigen::VectorXd hc(grid_size);
            for (int j = 0; j < grid_size; ++j) hc(j) = x(j * d + c);
            sq += hc.dot(gram_inv * hc);
        }
        return sq;
    };

    Eigen::VectorXd chow_nodes;
    {
        SolveOptions sopts;
        sopts.seed = splitmix64(opts.seed ^ 0xD15ULL);
        try {
            const PLPath cp = chow_path(u, sopts);
            const Eigen::MatrixXd nodes = resample_path_nodes(cp, grid_size);
            chow_nodes.resize(grid_size * d);
            for (int j = 0; j < grid_size; ++j)
                for (int c = 0; c < d; ++c) chow_nodes(j * d + c) = nodes(j, c);
        } catch (const std::exception&) {
            chow_nodes.resize(0);
        }
    }
    const Eigen::VectorXd first_layer = u.coords.head(d);
    const double scale = std::max(homogeneous_norm(u), 1e-6);
    auto make_start = [&](int idx) -> Eigen::VectorXd {
        if (idx == 0 && chow_nodes.size() > 0) return chow_nodes;
        RngStream rng(opts.seed, 0xDD00ULL, static_cast<uint64_t>(idx));
        Eigen::VectorXd x(grid_size * d);
        for (int j = 0; j < grid_size; ++j) {
            const double frac = static_cast<double>(j + 1) / grid_size;
            for (int c = 0; c < d; ++c)
                x(j * d + c) = frac * first_layer(c) + 0.7 * scale * std::sqrt(frac) * rng.normal() /
                                                           std::sqrt(static_cast<double>(grid_size));
        }
        return x;
    };

    // Run every start, then apply the mode's acceptance filter: dR only
    // accepts optima whose endpoint Jacobian passes the rank certificate.
    std::vector<ControlCandidate> cands(static_cast<size_t>(opts.multistarts));
    parallel_chunks(opts.multistarts, 1, opts.threads, [&](int64_t, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            ControlCandidate cand;
            cand.start = run_one_start(prob, make_start(static_cast<int>(i)), opts);
            const Eigen::MatrixXd J = central_diff_jacobian(
                [&](const Eigen::VectorXd& y) { return prob.coords_of(y); }, cand.start.x,
                opts.fd_step);
            Eigen::MatrixXd Js = J;
            const double base = std::max(1.0, homogeneous_norm(u));
            for (int r = 0; r < n; ++r)
                Js.row(r) *= std::pow(base, 1 - basis.degree(r));
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Js);
            cand.min_sv = svd.singularValues().size() > 0
                              ? svd.singularValues()(svd.singularValues().size() - 1)
                              : 0.0;
            for (Eigen::Index r = 0; r < svd.singularValues().size(); ++r)
                if (svd.singularValues()(r) > opts.rank_sv_tol) ++cand.rank;
            cand.nondegenerate = cand.min_sv > opts.rank_sv_tol;
            cands[static_cast<size_t>(i)] = std::move(cand);
        }
    });

    int best = -1;
    for (int i = 0; i < opts.multistarts; ++i) {
        const auto& c = cands[static_cast<size_t>(i)];
        if (mode == DistanceMode::dR && !c.nondegenerate) continue;
        if (best < 0) {
            best = i;
            continue;
        }
        const auto& b = cands[static_cast<size_t>(best)];
        const bool better = (c.start.restored != b.start.restored) ? c.start.restored
                          : (c.start.cost != b.start.cost)         ? c.start.cost < b.start.cost
                                                                   : c.start.mismatch_norm < b.start.mismatch_norm;
        if (better) best = i;
    }
    if (best < 0) {
        // dR mode with every candidate rank-deficient.
        est.converged = false;
        est.nondegenerate = false;
        return est;
    }
    const auto& win = cands[static_cast<size_t>(best)];
    est.value = std::sqrt(std::max(0.0, win.start.cost));
    est.certificate = path_from_increments(
        [&] {
            Eigen::VectorXd inc(grid_size * d);
            Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(d);
            for (int j = 0; j < grid_size; ++j)
                for (int c = 0; c < d; ++c) {
                    inc(j * d + c) = win.start.x(j * d + c) - prev(c);
                    prev(c) = win.start.x(j * d + c);
                }
            return inc;
        }(),
        grid_size, d);
    est.residual = homogeneous_residual(u, prob.coords_of(win.start.x));
    est.nondegenerate = win.nondegenerate;
    est.min_singular_value = win.min_sv;
    est.jacobian_rank = win.rank;
    est.converged = win.start.restored &&
                    est.residual <= opts.residual_tol * std::max(1.0, homogeneous_norm(u));
    return est;
}

ScanReport distance_equivalence_scan(std::shared_ptr<const HallBasis> basis, double H,
                                     int samples, int grid_size, int cc_segments,
                                     uint64_t seed, const PenaltyOptions& opts,
                                     int dilation_checks, double lambda) {
    ScanReport report;
    report.H = H;
    report.d = basis->d();
    report.N = basis->N();
    report.samples.resize(static_cast<size_t>(samples));
    report.all_converged = true;

    for (int i = 0; i < samples; ++i) {
        RngStream rng(seed, 0x5CA17ULL, static_cast<uint64_t>(i));
        Eigen::VectorXd z(basis->n());
        for (int j = 0; j < basis->n(); ++j) z(j) = rng.normal();
        GroupElement g = make_group_element(basis, z);
        g = dilate(1.0 / homogeneous_norm(g), g);  // unit homogeneous sphere

        PenaltyOptions local = opts;
        local.seed = splitmix64(seed ^ (0xABCD0000ULL + static_cast<uint64_t>(i)));
        ScanSample& rec = report.samples[static_cast<size_t>(i)];
        rec.u = g.coords;
        const DistanceEstimate dv = controlling_distance(g, H, grid_size, DistanceMode::d, local);
        const DistanceEstimate dRv = controlling_distance(g, H, grid_size, DistanceMode::dR, local);
        const DistanceEstimate cc = cc_norm_estimate(g, cc_segments, local);
        rec.d_value = dv.value;
        rec.dR_value = dRv.value;
        rec.cc_value = cc.value;
        rec.d_residual = dv.residual;
        rec.d_rank = dv.jacobian_rank;
        rec.d_converged = dv.converged;
        rec.dR_converged = dRv.converged;
        rec.cc_converged = cc.converged;
        rec.dR_nondegenerate = dRv.nondegenerate;
        rec.d_certificate = dv.certificate;
        if (!(dv.converged && cc.converged)) report.all_converged = false;

        if (i < dilation_checks) {
            const GroupElement gl = dilate(lambda, g);
            const DistanceEstimate dl = controlling_distance(gl, H, grid_size, DistanceMode::d, local);
            if (dl.converged && dv.value > 0.0) rec.dilation_ratio = dl.value / (lambda * dv.value);
        }
    }

    bool first = true;
    for (const auto& rec : report.samples) {
        if (!rec.d_converged) continue;
        if (first) {
            report.ratio_min = report.ratio_max = rec.d_value;
            report.cc_ratio_min = report.cc_ratio_max = rec.cc_value;
            first = false;
        } else {
            report.ratio_min = std::min(report.ratio_min, rec.d_value);
            report.ratio_max = std::max(report.ratio_max, rec.d_value);
            report.cc_ratio_min = std::min(report.cc_ratio_min, rec.cc_value);
            report.cc_ratio_max = std::max(report.cc_ratio_max, rec.cc_value);
        }
    }
    return report;
}

}  // namespace carnot
