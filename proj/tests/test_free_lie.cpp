#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include "nlohmann/json.hpp"

#include "carnot/lyndon.hpp"
#include "carnot/rng.hpp"
#include "carnot/tensor.hpp"
#include "oracles.hpp"

using carnot::BracketTree;
using carnot::HallBasis;
using carnot::RngStream;
using carnot::TruncatedTensor;

namespace {

std::span<const int> w(const std::vector<int>& v) { return {v.data(), v.size()}; }

BracketTree clone_tree(const BracketTree& t) {
    if (t.letter > 0) return BracketTree::leaf(t.letter);
    return BracketTree::node(clone_tree(*t.left), clone_tree(*t.right));
}

BracketTree random_tree(RngStream& rng, int depth, int d) {
    if (depth == 0 || rng.uniform01() < 0.4)
        return BracketTree::leaf(1 + static_cast<int>(rng.uniform01() * d));
    return BracketTree::node(random_tree(rng, depth - 1, d), random_tree(rng, depth - 1, d));
}

}  // namespace

TEST_CASE("layer dimensions match the necklace-counting oracle") {
    for (int d = 2; d <= 3; ++d) {
        const auto dims = carnot::layer_dims(d, 5);
        for (int j = 1; j <= 5; ++j)
            CHECK(dims[static_cast<size_t>(j - 1)] == oracle::count_lyndon_words(d, j));
    }
    CHECK(carnot::layer_dims(2, 5) == std::vector<int>{2, 1, 2, 3, 6});
    CHECK(carnot::layer_dims(1, 3) == std::vector<int>{1, 0, 0});
    CHECK(carnot::layer_dims(3, 3) == std::vector<int>{3, 3, 8});
}

TEST_CASE("hausdorff dimension") {
    CHECK(carnot::hausdorff_dim(2, 2) == 4);
    CHECK(carnot::hausdorff_dim(1, 1) == 1);
    CHECK(carnot::hausdorff_dim(2, 3) == 10);
}

TEST_CASE("Heisenberg basis is e1, e2, [e1,e2]") {
    const HallBasis basis(2, 2);
    CHECK(basis.n() == 3);
    CHECK(basis.bracket_string(0) == "1");
    CHECK(basis.bracket_string(1) == "2");
    CHECK(basis.bracket_string(2) == "[1,2]");
}

TEST_CASE("degree-3 members over two letters") {
    const HallBasis basis(2, 3);
    REQUIRE(basis.n() == 5);
    // Lyndon words 112 and 122 with standard factorization
    CHECK(basis.word(3) == std::vector<int>{1, 1, 2});
    CHECK(basis.word(4) == std::vector<int>{1, 2, 2});
    CHECK(basis.bracket_string(3) == "[1,[1,2]]");
    CHECK(basis.bracket_string(4) == "[[1,2],2]");
}

TEST_CASE("per-degree counts match layer_dims and expansions are independent") {
    for (int d = 2; d <= 3; ++d) {
        const int maxN = (d == 3) ? 4 : 5;
        for (int N = 2; N <= maxN; ++N) {
            const HallBasis basis(d, N);
            const auto dims = carnot::layer_dims(d, N);
            int total = 0;
            for (int k = 1; k <= N; ++k) {
                const auto [first, last] = basis.degree_range(k);
                CHECK(last - first == dims[static_cast<size_t>(k - 1)]);
                total += last - first;

                const int mk = last - first;
                if (mk == 0) continue;
                TruncatedTensor probe(d, N);
                Eigen::MatrixXd M(probe.level_size(k), mk);
                for (int c = 0; c < mk; ++c) {
                    const auto blk = basis.expansion(first + c).level_span(k);
                    for (int64_t r = 0; r < probe.level_size(k); ++r)
                        M(r, c) = blk[static_cast<size_t>(r)];
                }
                for (int c = 0; c < mk; ++c) M.col(c).normalize();
                const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
                CHECK(svd.singularValues()(svd.singularValues().size() - 1) > 1e-8);
            }
            CHECK(total == basis.n());
        }
    }
}

TEST_CASE("bracket expansion of [e1,e2]") {
    const auto t = carnot::bracket_to_tensor(
        BracketTree::node(BracketTree::leaf(1), BracketTree::leaf(2)), 2, 2);
    CHECK(t.coeff(w({1, 2})) == doctest::Approx(1.0));
    CHECK(t.coeff(w({2, 1})) == doctest::Approx(-1.0));
    CHECK(t.coeff(w({1})) == doctest::Approx(0.0));
}

TEST_CASE("bracket expansion of [e1,[e1,e2]]") {
    const auto t = carnot::bracket_to_tensor(
        BracketTree::node(BracketTree::leaf(1),
                          BracketTree::node(BracketTree::leaf(1), BracketTree::leaf(2))),
        2, 3);
    // e1 e1 e2 - 2 e1 e2 e1 + e2 e1 e1
    CHECK(t.coeff(w({1, 1, 2})) == doctest::Approx(1.0));
    CHECK(t.coeff(w({1, 2, 1})) == doctest::Approx(-2.0));
    CHECK(t.coeff(w({2, 1, 1})) == doctest::Approx(1.0));
    CHECK(t.coeff(w({2, 2, 1})) == doctest::Approx(0.0));
}

TEST_CASE("antisymmetry of the bracket expansion on random subtrees") {
    RngStream rng(3, 3);
    for (int rep = 0; rep < 10; ++rep) {
        const BracketTree a = random_tree(rng, 1, 2);
        const BracketTree b = random_tree(rng, 1, 2);
        const auto ab = carnot::bracket_to_tensor(
            BracketTree::node(clone_tree(a), clone_tree(b)), 2, 4);
        auto ba = carnot::bracket_to_tensor(
            BracketTree::node(clone_tree(b), clone_tree(a)), 2, 4);
        ba *= -1.0;
        for (int64_t i = 0; i < ab.total_size(); ++i)
            CHECK(ab.data()[static_cast<size_t>(i)] ==
                  doctest::Approx(ba.data()[static_cast<size_t>(i)]));
    }
}

TEST_CASE("degree overflow is rejected") {
    const BracketTree deep = BracketTree::node(
        BracketTree::node(BracketTree::leaf(1), BracketTree::leaf(2)),
        BracketTree::node(BracketTree::leaf(1), BracketTree::leaf(2)));
    CHECK_THROWS_AS((void)carnot::bracket_to_tensor(deep, 2, 3), std::invalid_argument);
}

TEST_CASE("projection of e1 x e2 - e2 x e1") {
    const auto basis = carnot::get_hall_basis(2, 2);
    TruncatedTensor t(2, 2);
    t.coeff(w({1, 2})) = 1.0;
    t.coeff(w({2, 1})) = -1.0;
    const Eigen::VectorXd c = basis->project_checked(t);
    CHECK(c(0) == doctest::Approx(0.0));
    CHECK(c(1) == doctest::Approx(0.0));
    CHECK(c(2) == doctest::Approx(1.0));
}

TEST_CASE("projection round trip on random coordinates") {
    const auto basis = carnot::get_hall_basis(2, 4);
    RngStream rng(17, 0);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd c(basis->n());
        for (int i = 0; i < basis->n(); ++i) c(i) = 2.0 * rng.uniform01() - 1.0;
        const TruncatedTensor t = basis->expand(c);
        double residual = 1.0;
        const Eigen::VectorXd back = basis->project(t, &residual);
        CHECK(residual < 1e-12);
        CHECK((back - c).lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("non-Lie input is rejected") {
    const auto basis = carnot::get_hall_basis(2, 2);
    TruncatedTensor t(2, 2);
    t.coeff(w({1, 2})) = 1.0;  // symmetric part present
    CHECK_THROWS_AS((void)basis->project_checked(t), std::domain_error);
}

TEST_CASE("zero coordinates expand to the zero tensor; unit coordinate to e1") {
    const auto basis = carnot::get_hall_basis(2, 3);
    const TruncatedTensor z = basis->expand(Eigen::VectorXd::Zero(basis->n()));
    CHECK(carnot::tensor_max_abs(z) == 0.0);
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(basis->n());
    e1(0) = 1.0;
    const TruncatedTensor t = basis->expand(e1);
    CHECK(t.coeff(w({1})) == doctest::Approx(1.0));
    CHECK(carnot::tensor_norm(t) == doctest::Approx(1.0));
}

TEST_CASE("BCH closure: log of a product of grouplike elements projects cleanly") {
    const auto basis = carnot::get_hall_basis(3, 4);
    RngStream rng(23, 9);
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::VectorXd a(basis->n()), b(basis->n());
        for (int i = 0; i < basis->n(); ++i) {
            a(i) = rng.uniform01() - 0.5;
            b(i) = rng.uniform01() - 0.5;
        }
        const TruncatedTensor x = carnot::tensor_exp(basis->expand(a));
        const TruncatedTensor y = carnot::tensor_exp(basis->expand(b));
        const TruncatedTensor z = carnot::tensor_log(carnot::tensor_mul(x, y));
        double residual = 1.0;
        (void)basis->project(z, &residual);
        CHECK(residual < 1e-10 * (1.0 + carnot::tensor_norm(z)));
    }
}

TEST_CASE("basis JSON dump") {
    const auto j = carnot::get_hall_basis(2, 3)->to_json();
    CHECK(j["d"] == 2);
    CHECK(j["n"] == 5);
    CHECK(j["brackets"][2] == "[1,2]");
    CHECK(j["brackets"][3] == "[1,[1,2]]");
}
