#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "carnot/fbm.hpp"
#include "carnot/stats.hpp"

using carnot::FbmBatch;

TEST_CASE("covariance function") {
    CHECK(carnot::fbm_cov(2.0, 2.0, 0.25) == doctest::Approx(std::sqrt(2.0)));
    CHECK(carnot::fbm_cov(0.5, 1.0, 0.5) == doctest::Approx(0.5));
    CHECK(carnot::fbm_cov(1.0, 0.0, 0.75) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)carnot::fbm_cov(1.0, 1.0, 1.5), std::invalid_argument);
}

TEST_CASE("cholesky sampler: variance of B_1") {
    const int64_t count = 100000;
    for (double H : {0.3, 0.75}) {
        const FbmBatch b = carnot::sample_fbm_cholesky({0.5, 1.0}, H, 1, count, 99);
        std::vector<double> x(static_cast<size_t>(count));
        for (int64_t s = 0; s < count; ++s) x[static_cast<size_t>(s)] = b.value(s, 1, 0);
        const auto mv = carnot::mean_var(x);
        // var of the sample variance of a Gaussian: 2 sigma^4 / (n-1)
        const double band = 3.0 * std::sqrt(2.0 / static_cast<double>(count - 1));
        CHECK(std::abs(mv.var - 1.0) < band);
        CHECK(std::abs(mv.mean) < 3.0 / std::sqrt(static_cast<double>(count)));
    }
}

TEST_CASE("cholesky sampler: Brownian covariance at (0.5, 1.0)") {
    const int64_t count = 100000;
    const FbmBatch b = carnot::sample_fbm_cholesky({0.5, 1.0}, 0.5, 1, count, 7);
    double acc = 0.0;
    for (int64_t s = 0; s < count; ++s) acc += b.value(s, 0, 0) * b.value(s, 1, 0);
    const double cov = acc / static_cast<double>(count);
    // var of the covariance estimator ~ (c_xx c_yy + c_xy^2)/n
    const double band = 3.0 * std::sqrt((0.5 * 1.0 + 0.25) / static_cast<double>(count));
    CHECK(std::abs(cov - 0.5) < band);
}

TEST_CASE("cholesky sampler: full 8-point covariance at H = 0.75 within 3 sigma") {
    const int64_t count = 100000;
    const double H = 0.75;
    const std::vector<double> grid = carnot::uniform_grid(8, 1.0);
    const FbmBatch b = carnot::sample_fbm_cholesky(grid, H, 2, count, 1234);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j <= i; ++j) {
            const double expected = carnot::fbm_cov(grid[static_cast<size_t>(i)],
                                                    grid[static_cast<size_t>(j)], H);
            for (int c = 0; c < 2; ++c) {
                double acc = 0.0;
                for (int64_t s = 0; s < count; ++s) acc += b.value(s, i, c) * b.value(s, j, c);
                const double est = acc / static_cast<double>(count);
                const double vii = carnot::fbm_cov(grid[static_cast<size_t>(i)],
                                                   grid[static_cast<size_t>(i)], H);
                const double vjj = carnot::fbm_cov(grid[static_cast<size_t>(j)],
                                                   grid[static_cast<size_t>(j)], H);
                const double band =
                    3.0 * std::sqrt((vii * vjj + expected * expected) / static_cast<double>(count));
                CHECK(std::abs(est - expected) < band);
            }
        }
}

TEST_CASE("circulant sampler: Brownian increments are uncorrelated") {
    const int64_t count = 50000;
    const int steps = 16;
    const FbmBatch b = carnot::sample_fbm_circulant(steps, 1.0, 0.5, 1, count, 5);
    double acc = 0.0, v1 = 0.0, v2 = 0.0;
    for (int64_t s = 0; s < count; ++s) {
        const double d1 = b.value(s, 1, 0) - b.value(s, 0, 0);
        const double d2 = b.value(s, 2, 0) - b.value(s, 1, 0);
        acc += d1 * d2;
        v1 += d1 * d1;
        v2 += d2 * d2;
    }
    const double corr = acc / std::sqrt(v1 * v2);
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("circulant sampler: increment variance is dt^2H") {
    const int64_t count = 50000;
    const int steps = 32;
    for (double H : {0.3, 0.6}) {
        const FbmBatch b = carnot::sample_fbm_circulant(steps, 1.0, H, 1, count, 21);
        std::vector<double> d(static_cast<size_t>(count));
        for (int64_t s = 0; s < count; ++s) d[static_cast<size_t>(s)] = b.value(s, 0, 0);
        const auto mv = carnot::mean_var(d);
        const double expected = std::pow(1.0 / steps, 2.0 * H);
        const double band = 3.0 * expected * std::sqrt(2.0 / static_cast<double>(count - 1));
        CHECK(std::abs(mv.var - expected) < band);
    }
}

TEST_CASE("circulant and cholesky samplers agree in law (KS on B_1)") {
    const int64_t count = 10000;
    for (double H : {0.3, 0.5, 0.75}) {
        const int steps = 16;
        const FbmBatch bc = carnot::sample_fbm_circulant(steps, 1.0, H, 1, count, 11);
        const FbmBatch bl =
            carnot::sample_fbm_cholesky(carnot::uniform_grid(steps, 1.0), H, 1, count, 12);
        std::vector<double> a(static_cast<size_t>(count)), b(static_cast<size_t>(count));
        for (int64_t s = 0; s < count; ++s) {
            a[static_cast<size_t>(s)] = bc.value(s, steps - 1, 0);
            b[static_cast<size_t>(s)] = bl.value(s, steps - 1, 0);
        }
        const auto ks = carnot::ks_two_sample(a, b);
        CHECK(ks.p_value > 0.01);
    }
}

TEST_CASE("circulant sampler: covariance E[B_1 B_0.5] at H = 0.3") {
    const int64_t count = 100000;
    const int steps = 16;
    const FbmBatch b = carnot::sample_fbm_circulant(steps, 1.0, 0.3, 1, count, 31);
    double acc = 0.0;
    for (int64_t s = 0; s < count; ++s)
        acc += b.value(s, steps - 1, 0) * b.value(s, steps / 2 - 1, 0);
    const double est = acc / static_cast<double>(count);
    const double expected = carnot::fbm_cov(1.0, 0.5, 0.3);
    const double band = 3.0 * std::sqrt((1.0 * carnot::fbm_cov(0.5, 0.5, 0.3) +
                                         expected * expected) /
                                        static_cast<double>(count));
    CHECK(std::abs(est - expected) < band);
}

TEST_CASE("coordinate axes are independent") {
    const int64_t count = 50000;
    const FbmBatch b = carnot::sample_fbm_circulant(8, 1.0, 0.7, 2, count, 83);
    double acc = 0.0;
    for (int64_t s = 0; s < count; ++s) acc += b.value(s, 7, 0) * b.value(s, 7, 1);
    const double cov = acc / static_cast<double>(count);
    CHECK(std::abs(cov) < 3.0 / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("fixed seed reproduces bit-identical batches across thread counts") {
    const FbmBatch a = carnot::sample_fbm_circulant(16, 1.0, 0.6, 2, 500, 77, 1);
    const FbmBatch b = carnot::sample_fbm_circulant(16, 1.0, 0.6, 2, 500, 77, 2);
    REQUIRE(a.data.size() == b.data.size());
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);

    const FbmBatch c = carnot::sample_fbm_cholesky({0.25, 0.5, 1.0}, 0.4, 2, 300, 9, 1);
    const FbmBatch d = carnot::sample_fbm_cholesky({0.25, 0.5, 1.0}, 0.4, 2, 300, 9, 2);
    for (size_t i = 0; i < c.data.size(); ++i) CHECK(c.data[i] == d.data[i]);
}

TEST_CASE("streaming sampler matches the batch circulant sampler") {
    const int steps = 16;
    const FbmBatch b = carnot::sample_fbm_circulant(steps, 1.0, 0.7, 2, 50, 123);
    const carnot::FbmPathSampler sampler(steps, 1.0, 0.7, 2, 123);
    CHECK(sampler.circulant());
    std::vector<double> path(static_cast<size_t>(steps) * 2);
    for (int64_t s = 0; s < 50; ++s) {
        sampler.sample_path(s, path.data());
        for (int j = 0; j < steps; ++j)
            for (int c = 0; c < 2; ++c)
                CHECK(path[static_cast<size_t>(j * 2 + c)] == b.value(s, j, c));
    }
}

TEST_CASE("binary dump round trip") {
    const FbmBatch b = carnot::sample_fbm_circulant(8, 2.0, 0.45, 3, 20, 55);
    const std::string file = "test_fbm_dump.bin";
    carnot::write_fbm_bin(file, b);
    const FbmBatch r = carnot::read_fbm_bin(file);
    CHECK(r.H == b.H);
    CHECK(r.d == b.d);
    CHECK(r.count == b.count);
    CHECK(r.seed == b.seed);
    REQUIRE(r.grid.size() == b.grid.size());
    REQUIRE(r.data.size() == b.data.size());
    for (size_t i = 0; i < b.data.size(); ++i) CHECK(r.data[i] == b.data[i]);
    std::remove(file.c_str());
}

TEST_CASE("csv export schema") {
    const FbmBatch b = carnot::sample_fbm_circulant(4, 1.0, 0.5, 2, 2, 3);
    const std::string file = "test_fbm.csv";
    carnot::write_fbm_csv(file, b);
    std::FILE* f = std::fopen(file.c_str(), "r");
    REQUIRE(f != nullptr);
    char line[256];
    REQUIRE(std::fgets(line, sizeof line, f) != nullptr);
    CHECK(std::string(line) == "sample,t,x1,x2\n");
    int rows = 0;
    while (std::fgets(line, sizeof line, f)) ++rows;
    CHECK(rows == 8);
    std::fclose(f);
    std::remove(file.c_str());
}
