#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "carnot/tensor.hpp"
#include "nlohmann/json_fwd.hpp"

namespace carnot {

int mobius(int n);

// Witt formula: dim of layer j is (1/j) sum_{i | j} mu(i) d^{j/i}.
std::vector<int> layer_dims(int d, int N);

// Homogeneous (Hausdorff) dimension nu = sum_j j * dim V_j.
int hausdorff_dim(int d, int N);

// Iterated-bracket tree: a leaf letter or an ordered pair of subtrees.
struct BracketTree {
    int letter = 0;  // 1..d for leaves, 0 for internal nodes
    std::unique_ptr<BracketTree> left, right;

    static BracketTree leaf(int letter);
    static BracketTree node(BracketTree l, BracketTree r);
    int degree() const;
};

// Expansion into the tensor algebra: leaf -> e_i, node -> l (x) r - r (x) l.
TruncatedTensor bracket_to_tensor(const BracketTree& t, int d, int N);

// Lyndon-word basis of the free N-step nilpotent Lie algebra over R^d,
// bracketed by the standard (longest proper Lyndon suffix) factorization.
// Ordering: degree first, then lexicographic on the word. Children of every
// element appear earlier in the list.
class HallBasis {
public:
    HallBasis(int d, int N);

    int d() const { return d_; }
    int N() const { return N_; }
    int n() const { return static_cast<int>(words_.size()); }

    const std::vector<int>& word(int i) const { return words_[static_cast<size_t>(i)]; }
    int degree(int i) const { return static_cast<int>(words_[static_cast<size_t>(i)].size()); }
    // Index range [first, last) of basis elements of the given degree.
    std::pair<int, int> degree_range(int k) const;
    // Children in the standard factorization; (-1,-1) for single letters.
    std::pair<int, int> children(int i) const { return children_[static_cast<size_t>(i)]; }

    const TruncatedTensor& expansion(int i) const { return expansions_[static_cast<size_t>(i)]; }
    std::string bracket_string(int i) const;

    // Coordinates of a Lie element of T_N in this basis (least squares per
    // homogeneous degree). Fills *residual with the Euclidean reconstruction
    // error when given.
    Eigen::VectorXd project(const TruncatedTensor& lie, double* residual = nullptr) const;

    // Same, but throws if the residual exceeds 1e-9 * (1 + |x|): the input
    // was not a Lie element.
    Eigen::VectorXd project_checked(const TruncatedTensor& lie) const;

    // Linear combination sum_i coords[i] * expansion(i).
    TruncatedTensor expand(const Eigen::VectorXd& coords) const;

    nlohmann::json to_json() const;

private:
    int d_, N_;
    std::vector<std::vector<int>> words_;
    std::vector<std::pair<int, int>> children_;
    std::vector<int> degree_first_;  // size N+2, prefix offsets per degree
    std::vector<TruncatedTensor> expansions_;
    // Per-degree least-squares factorization of the expansion matrix.
    std::vector<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> qr_;
    std::vector<Eigen::MatrixXd> expansion_matrix_;
};

std::shared_ptr<const HallBasis> get_hall_basis(int d, int N);  // process-wide cache

}  // namespace carnot
