#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "carnot/cameron_martin.hpp"
#include "carnot/fbm.hpp"
#include "carnot/rng.hpp"

using carnot::GridFunction;
using carnot::RngStream;

namespace {

GridFunction smooth_function(const std::vector<double>& grid, double H, int d = 1) {
    Eigen::MatrixXd values(static_cast<Eigen::Index>(grid.size()), d);
    for (size_t j = 0; j < grid.size(); ++j)
        for (int c = 0; c < d; ++c)
            values(static_cast<Eigen::Index>(j), c) =
                std::sin(3.0 * grid[j] + c) + grid[j] * (1.0 + 0.2 * c);
    return carnot::make_grid_function(std::vector<double>(grid), std::move(values), H);
}

}  // namespace

TEST_CASE("gram matrix basics") {
    const Eigen::MatrixXd g1 = carnot::cm_gram({1.0}, 0.65);
    CHECK(g1(0, 0) == doctest::Approx(1.0));

    const std::vector<double> grid = carnot::uniform_grid(4, 1.0);
    const Eigen::MatrixXd g = carnot::cm_gram(grid, 0.5);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(g(i, j) == doctest::Approx(std::min(grid[static_cast<size_t>(i)],
                                                      grid[static_cast<size_t>(j)])));
}

TEST_CASE("gram matrices are positive definite on uniform 32-grids") {
    const std::vector<double> grid = carnot::uniform_grid(32, 1.0);
    for (double H : {0.3, 0.5, 0.75}) {
        const Eigen::MatrixXd g = carnot::cm_gram(grid, H);
        const Eigen::VectorXd ev = g.selfadjointView<Eigen::Lower>().eigenvalues();
        CHECK(ev.minCoeff() > 0.0);
    }
}

TEST_CASE("reproducing property: kernel columns have norm sqrt(R(s,s))") {
    const std::vector<double> grid = carnot::uniform_grid(16, 1.0);
    for (double H : {0.3, 0.5, 0.8}) {
        for (int si : {3, 9, 15}) {
            const double s = grid[static_cast<size_t>(si)];
            Eigen::MatrixXd values(16, 1);
            for (int j = 0; j < 16; ++j)
                values(j, 0) = carnot::fbm_cov(grid[static_cast<size_t>(j)], s, H);
            const GridFunction h = carnot::make_grid_function(std::vector<double>(grid),
                                                              std::move(values), H);
            CHECK(carnot::cm_norm_discrete(h) ==
                  doctest::Approx(std::pow(s, H)).epsilon(1e-10));
        }
    }
}

TEST_CASE("Brownian specialization: h(t) = t has unit norm") {
    for (int m : {5, 16, 33}) {
        const std::vector<double> grid = carnot::uniform_grid(m, 1.0);
        Eigen::MatrixXd values(m, 1);
        for (int j = 0; j < m; ++j) values(j, 0) = grid[static_cast<size_t>(j)];
        const GridFunction h =
            carnot::make_grid_function(std::vector<double>(grid), std::move(values), 0.5);
        CHECK(carnot::cm_norm_discrete(h) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("Brownian norm equals the discrete Dirichlet energy") {
    RngStream rng(44, 0);
    const std::vector<double> grid = carnot::uniform_grid(24, 1.0);
    Eigen::MatrixXd values(24, 2);
    for (int j = 0; j < 24; ++j)
        for (int c = 0; c < 2; ++c) values(j, c) = rng.normal();
    const GridFunction h = carnot::make_grid_function(std::vector<double>(grid), values, 0.5);
    double energy = 0.0;
    for (int c = 0; c < 2; ++c) {
        double prev = 0.0, tprev = 0.0;
        for (int j = 0; j < 24; ++j) {
            const double dh = values(j, c) - prev;
            const double dt = grid[static_cast<size_t>(j)] - tprev;
            energy += dh * dh / dt;
            prev = values(j, c);
            tprev = grid[static_cast<size_t>(j)];
        }
    }
    CHECK(carnot::cm_norm_discrete(h) == doctest::Approx(std::sqrt(energy)).epsilon(1e-12));
}

TEST_CASE("refinement monotonicity for a smooth function") {
    for (double H : {0.4, 0.75}) {
        const GridFunction coarse = smooth_function(carnot::uniform_grid(16, 1.0), H);
        const GridFunction fine = smooth_function(carnot::uniform_grid(32, 1.0), H);
        CHECK(carnot::cm_norm_discrete(coarse) <= carnot::cm_norm_discrete(fine) + 1e-10);
    }
}

TEST_CASE("concatenation with the zero path extends by a constant tail") {
    const GridFunction h1 = smooth_function(carnot::uniform_grid(8, 1.0), 0.6);
    Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, 1);
    const GridFunction h2 =
        carnot::make_grid_function(carnot::uniform_grid(4, 0.5), std::move(zeros), 0.6);
    const GridFunction cat = carnot::concat_grid_paths(h1, h2);
    CHECK(cat.size() == 12);
    CHECK(cat.T() == doctest::Approx(1.5));
    const double tail = h1.values(7, 0);
    for (int j = 8; j < 12; ++j) CHECK(cat.values(j, 0) == doctest::Approx(tail));
}

TEST_CASE("concatenation endpoint adds") {
    const GridFunction h1 = smooth_function(carnot::uniform_grid(8, 1.0), 0.4, 2);
    const GridFunction h2 = smooth_function(carnot::uniform_grid(6, 2.0), 0.4, 2);
    const GridFunction cat = carnot::concat_grid_paths(h1, h2);
    for (int c = 0; c < 2; ++c)
        CHECK(cat.values(cat.size() - 1, c) ==
              doctest::Approx(h1.values(7, c) + h2.values(5, c)));
}

TEST_CASE("concatenation norms stay bounded across a randomized family") {
    RngStream rng(45, 1);
    for (double H : {0.35, 0.5, 0.75}) {
        double max_ratio = 0.0;
        for (int rep = 0; rep < 100; ++rep) {
            const int m1 = 4 + static_cast<int>(rng.uniform01() * 8);
            const int m2 = 4 + static_cast<int>(rng.uniform01() * 8);
            Eigen::MatrixXd v1(m1, 1), v2(m2, 1);
            for (int j = 0; j < m1; ++j) v1(j, 0) = std::sin(1.0 + j * 0.4) * rng.uniform01();
            for (int j = 0; j < m2; ++j) v2(j, 0) = std::cos(0.3 * j) * rng.uniform01();
            const GridFunction h1 =
                carnot::make_grid_function(carnot::uniform_grid(m1, 1.0), std::move(v1), H);
            const GridFunction h2 =
                carnot::make_grid_function(carnot::uniform_grid(m2, 1.0), std::move(v2), H);
            const double n1 = carnot::cm_norm_discrete(h1);
            const double n2 = carnot::cm_norm_discrete(h2);
            const double nc = carnot::cm_norm_discrete(carnot::concat_grid_paths(h1, h2));
            CHECK(std::isfinite(nc));
            max_ratio = std::max(max_ratio, nc / (n1 + n2 + 1e-12));
        }
        CHECK(max_ratio < 50.0);  // boundedness smoke test, not a sharp constant
    }
}

TEST_CASE("grid function CSV round trip (PLPath layout)") {
    const GridFunction h = smooth_function(carnot::uniform_grid(6, 1.5), 0.65, 2);
    const std::string file = "test_gridfn.csv";
    carnot::write_grid_function_csv(file, h);
    const GridFunction r = carnot::read_grid_function_csv(file, 0.65);
    REQUIRE(r.size() == h.size());
    CHECK(r.dim() == 2);
    for (int j = 0; j < h.size(); ++j)
        CHECK(r.times[static_cast<size_t>(j)] ==
              doctest::Approx(h.times[static_cast<size_t>(j)]).epsilon(1e-16));
    CHECK((r.values - h.values).lpNorm<Eigen::Infinity>() == 0.0);
    std::remove(file.c_str());
}

TEST_CASE("gram factor cache returns a consistent factorization") {
    const std::vector<double> grid = carnot::uniform_grid(8, 1.0);
    const auto& f1 = carnot::cm_gram_factor_cached(grid, 0.6);
    const auto& f2 = carnot::cm_gram_factor_cached(grid, 0.6);
    CHECK(&f1 == &f2);
    const GridFunction h = smooth_function(grid, 0.6);
    CHECK(carnot::cm_norm_discrete(h, f1) == doctest::Approx(carnot::cm_norm_discrete(h)));
}

TEST_CASE("rescaling ratio is exactly (T1/T2)^H") {
    const GridFunction h = smooth_function(carnot::uniform_grid(12, 1.0), 0.5);
    const auto [before_same, after_same] = carnot::rescale_check(h, 1.0);
    CHECK(after_same == doctest::Approx(before_same).epsilon(1e-14));

    // H = 0.5, h(t) = t on [0,1] -> [0,2]
    Eigen::MatrixXd lin(8, 1);
    const std::vector<double> grid = carnot::uniform_grid(8, 1.0);
    for (int j = 0; j < 8; ++j) lin(j, 0) = grid[static_cast<size_t>(j)];
    const GridFunction hl = carnot::make_grid_function(std::vector<double>(grid), std::move(lin), 0.5);
    const auto [b2, a2] = carnot::rescale_check(hl, 2.0);
    CHECK(a2 / b2 == doctest::Approx(std::pow(0.5, 0.5)).epsilon(1e-12));

    RngStream rng(47, 3);
    Eigen::MatrixXd vr(10, 2);
    for (int j = 0; j < 10; ++j)
        for (int c = 0; c < 2; ++c) vr(j, c) = rng.normal();
    const GridFunction hr =
        carnot::make_grid_function(carnot::uniform_grid(10, 1.0), std::move(vr), 0.75);
    const auto [b3, a3] = carnot::rescale_check(hr, 4.0);
    CHECK(a3 / b3 == doctest::Approx(std::pow(0.25, 0.75)).epsilon(1e-10));
}
