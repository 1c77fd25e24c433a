#include "carnot/cameron_martin.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>

#include "carnot/fbm.hpp"
#include "carnot/pl_path.hpp"

namespace carnot {

void GridFunction::validate() const {
    if (times.empty()) throw std::invalid_argument("GridFunction: empty grid");
    if (static_cast<Eigen::Index>(times.size()) != values.rows())
        throw std::invalid_argument("GridFunction: times/values size mismatch");
    double prev = 0.0;
    for (double t : times) {
        if (!(t > prev)) throw std::invalid_argument("GridFunction: grid must be strictly increasing and > 0");
        prev = t;
    }
    if (!values.allFinite()) throw std::invalid_argument("GridFunction: non-finite values");
    if (!(H > 0.0 && H < 1.0)) throw std::invalid_argument("GridFunction: H must be in (0,1)");
}

GridFunction make_grid_function(std::vector<double> times, Eigen::MatrixXd values, double H) {
    GridFunction h;
    h.times = std::move(times);
    h.values = std::move(values);
    h.H = H;
    h.validate();
    return h;
}

Eigen::MatrixXd cm_gram(const std::vector<double>& grid, double H) {
    const auto m = static_cast<Eigen::Index>(grid.size());
    if (m == 0) throw std::invalid_argument("cm_gram: empty grid");
    Eigen::MatrixXd G(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = fbm_cov(grid[static_cast<size_t>(i)], grid[static_cast<size_t>(j)], H);
            G(i, j) = v;
            G(j, i) = v;
        }
    return G;
}

GramFactor cm_gram_factor(const std::vector<double>& grid, double H) {
    Eigen::MatrixXd G = cm_gram(grid, H);
    GramFactor f;
    f.llt.compute(G);
    if (f.llt.info() != Eigen::Success) {
        f.jitter = 1e-12 * G.trace() / static_cast<double>(G.rows());
        G.diagonal().array() += f.jitter;
        f.jittered = true;
        f.llt.compute(G);
        if (f.llt.info() != Eigen::Success)
            throw std::runtime_error("cm_gram_factor: Gram matrix is singular even with jitter");
    }
    return f;
}

double cm_norm_discrete(const GridFunction& h, const GramFactor& factor) {
    h.validate();
    double sq = 0.0;
    for (int c = 0; c < h.dim(); ++c) {
        const Eigen::VectorXd hc = h.values.col(c);
        sq += hc.dot(factor.llt.solve(hc));
    }
    // Clamp tiny negative values from roundoff on near-singular grids.
    return std::sqrt(std::max(0.0, sq));
}

const GramFactor& cm_gram_factor_cached(const std::vector<double>& grid, double H) {
    using Key = std::pair<std::vector<double>, double>;
    static std::shared_mutex mu;
    static std::map<Key, std::unique_ptr<GramFactor>> cache;
    const Key key{grid, H};
    {
        std::shared_lock lock(mu);
        const auto it = cache.find(key);
        if (it != cache.end()) return *it->second;
    }
    auto factor = std::make_unique<GramFactor>(cm_gram_factor(grid, H));
    std::unique_lock lock(mu);
    auto& slot = cache[key];
    if (!slot) slot = std::move(factor);
    return *slot;
}

double cm_norm_discrete(const GridFunction& h) {
    return cm_norm_discrete(h, cm_gram_factor_cached(h.times, h.H));
}

GridFunction concat_grid_paths(const GridFunction& h1, const GridFunction& h2) {
    h1.validate();
    h2.validate();
    if (h1.dim() != h2.dim()) throw std::invalid_argument("concat_grid_paths: dimension mismatch");
    if (h1.H != h2.H) throw std::invalid_argument("concat_grid_paths: Hurst parameter mismatch");
    GridFunction out;
    out.H = h1.H;
    const int m1 = h1.size(), m2 = h2.size();
    out.times.reserve(static_cast<size_t>(m1 + m2));
    out.values.resize(m1 + m2, h1.dim());
    for (int j = 0; j < m1; ++j) {
        out.times.push_back(h1.times[static_cast<size_t>(j)]);
        out.values.row(j) = h1.values.row(j);
    }
    const double T1 = h1.T();
    const Eigen::RowVectorXd shift = h1.values.row(m1 - 1);
    for (int j = 0; j < m2; ++j) {
        out.times.push_back(T1 + h2.times[static_cast<size_t>(j)]);
        out.values.row(m1 + j) = h2.values.row(j) + shift;
    }
    return out;
}

std::pair<double, double> rescale_check(const GridFunction& h, double T2) {
    h.validate();
    if (!(T2 > 0.0)) throw std::invalid_argument("rescale_check: T2 must be > 0");
    const double before = cm_norm_discrete(h);
    GridFunction scaled = h;
    const double ratio = T2 / h.T();
    for (double& t : scaled.times) t *= ratio;
    const double after = cm_norm_discrete(scaled);
    return {before, after};
}

void write_grid_function_csv(const std::string& filename, const GridFunction& h) {
    h.validate();
    PLPath p;
    p.times.reserve(h.times.size() + 1);
    p.times.push_back(0.0);
    p.times.insert(p.times.end(), h.times.begin(), h.times.end());
    p.values.setZero(h.size() + 1, h.dim());
    p.values.bottomRows(h.size()) = h.values;
    write_pl_path_csv(filename, p);
}

GridFunction read_grid_function_csv(const std::string& filename, double H) {
    const PLPath p = read_pl_path_csv(filename);
    if (p.times.front() != 0.0)
        throw std::runtime_error("grid function CSV must start at t = 0");
    GridFunction h;
    h.H = H;
    h.times.assign(p.times.begin() + 1, p.times.end());
    // paths start at the origin: values are relative to the first row
    h.values = p.values.bottomRows(p.values.rows() - 1).rowwise() - p.values.row(0);
    h.validate();
    return h;
}

}  // namespace carnot
