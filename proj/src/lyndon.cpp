#include "carnot/lyndon.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace carnot {

int mobius(int n) {
    if (n < 1) throw std::invalid_argument("mobius: n must be >= 1");
    int distinct = 0;
    for (int p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            n /= p;
            if (n % p == 0) return 0;  // squared factor
            ++distinct;
        }
    }
    if (n > 1) ++distinct;
    return (distinct % 2 == 0) ? 1 : -1;
}

std::vector<int> layer_dims(int d, int N) {
    if (d < 1 || N < 1) throw std::invalid_argument("layer_dims: need d >= 1, N >= 1");
    std::vector<int> dims(static_cast<size_t>(N));
    for (int j = 1; j <= N; ++j) {
        int64_t sum = 0;
        for (int i = 1; i <= j; ++i) {
            if (j % i != 0) continue;
            int64_t p = 1;
            for (int e = 0; e < j / i; ++e) p *= d;
            sum += mobius(i) * p;
        }
        dims[static_cast<size_t>(j - 1)] = static_cast<int>(sum / j);
    }
    return dims;
}

int hausdorff_dim(int d, int N) {
    const auto dims = layer_dims(d, N);
    int nu = 0;
    for (int j = 1; j <= N; ++j) nu += j * dims[static_cast<size_t>(j - 1)];
    return nu;
}

BracketTree BracketTree::leaf(int letter) {
    BracketTree t;
    t.letter = letter;
    return t;
}

BracketTree BracketTree::node(BracketTree l, BracketTree r) {
    BracketTree t;
    t.left = std::make_unique<BracketTree>(std::move(l));
    t.right = std::make_unique<BracketTree>(std::move(r));
    return t;
}

int BracketTree::degree() const {
    if (letter > 0) return 1;
    return left->degree() + right->degree();
}

TruncatedTensor bracket_to_tensor(const BracketTree& t, int d, int N) {
    if (t.degree() > N) throw std::invalid_argument("bracket_to_tensor: degree exceeds N");
    TruncatedTensor out(d, N);
    if (t.letter > 0) {
        const int w[1] = {t.letter};
        out.coeff(std::span<const int>(w, 1)) = 1.0;
        return out;
    }
    const TruncatedTensor l = bracket_to_tensor(*t.left, d, N);
    const TruncatedTensor r = bracket_to_tensor(*t.right, d, N);
    out = tensor_mul(l, r);
    out -= tensor_mul(r, l);
    return out;
}

namespace {

// Duval's algorithm: all Lyndon words over {1..d} of length <= N, in
// lexicographic order.
std::vector<std::vector<int>> lyndon_words(int d, int N) {
    std::vector<std::vector<int>> out;
    std::vector<int> w{1};
    while (!w.empty()) {
        out.push_back(w);
        const size_t m = w.size();
        while (w.size() < static_cast<size_t>(N))
            w.push_back(w[w.size() % m]);
        while (!w.empty() && w.back() == d) w.pop_back();
        if (!w.empty()) ++w.back();
    }
    return out;
}

// A word is Lyndon iff it is strictly smaller than every proper suffix.
bool is_lyndon(std::span<const int> w) {
    for (size_t i = 1; i < w.size(); ++i) {
        if (!std::lexicographical_compare(w.begin(), w.end(),
                                          w.begin() + static_cast<ptrdiff_t>(i), w.end()))
            return false;
    }
    return true;
}

}  // namespace

HallBasis::HallBasis(int d, int N) : d_(d), N_(N) {
    if (d < 1 || N < 1) throw std::invalid_argument("HallBasis: need d >= 1, N >= 1");

    auto words = lyndon_words(d, N);
    std::stable_sort(words.begin(), words.end(),
                     [](const std::vector<int>& a, const std::vector<int>& b) {
                         if (a.size() != b.size()) return a.size() < b.size();
                         return a < b;
                     });
    words_ = std::move(words);

    degree_first_.assign(static_cast<size_t>(N_) + 2, 0);
    std::map<std::vector<int>, int> index_of;
    for (int i = 0; i < n(); ++i) index_of[words_[static_cast<size_t>(i)]] = i;
    for (int k = 1; k <= N_ + 1; ++k) {
        int first = n();
        for (int i = 0; i < n(); ++i) {
            if (degree(i) >= k) {
                first = i;
                break;
            }
        }
        degree_first_[static_cast<size_t>(k)] = first;
    }

    // Standard factorization: split at the longest proper suffix that is
    // itself a Lyndon word.
    children_.resize(words_.size(), {-1, -1});
    for (int i = 0; i < n(); ++i) {
        const auto& w = words_[static_cast<size_t>(i)];
        if (w.size() == 1) continue;
        for (size_t split = 1; split < w.size(); ++split) {
            std::span<const int> suffix(w.data() + split, w.size() - split);
            if (suffix.size() == 1 || is_lyndon(suffix)) {
                const std::vector<int> u(w.begin(), w.begin() + static_cast<ptrdiff_t>(split));
                const std::vector<int> v(suffix.begin(), suffix.end());
                children_[static_cast<size_t>(i)] = {index_of.at(u), index_of.at(v)};
                break;
            }
        }
        if (children_[static_cast<size_t>(i)].first < 0)
            throw std::logic_error("HallBasis: standard factorization failed");
    }

    // Expansions into T_N via [u,v] = u (x) v - v (x) u on the children.
    expansions_.reserve(words_.size());
    for (int i = 0; i < n(); ++i) {
        if (degree(i) == 1) {
            TruncatedTensor t(d_, N_);
            const int w[1] = {words_[static_cast<size_t>(i)][0]};
            t.coeff(std::span<const int>(w, 1)) = 1.0;
            expansions_.push_back(std::move(t));
        } else {
            const auto [li, ri] = children_[static_cast<size_t>(i)];
            const auto& l = expansions_[static_cast<size_t>(li)];
            const auto& r = expansions_[static_cast<size_t>(ri)];
            TruncatedTensor t = tensor_mul(l, r);
            t -= tensor_mul(r, l);
            expansions_.push_back(std::move(t));
        }
    }

    // Per-degree least-squares projection onto the expansions.
    qr_.resize(static_cast<size_t>(N_) + 1);
    expansion_matrix_.resize(static_cast<size_t>(N_) + 1);
    TruncatedTensor probe(d_, N_);
    for (int k = 1; k <= N_; ++k) {
        const auto [first, last] = degree_range(k);
        const int mk = last - first;
        if (mk == 0) continue;
        Eigen::MatrixXd M(probe.level_size(k), mk);
        for (int c = 0; c < mk; ++c) {
            const auto blk = expansions_[static_cast<size_t>(first + c)].level_span(k);
            for (int64_t r = 0; r < probe.level_size(k); ++r) M(r, c) = blk[static_cast<size_t>(r)];
        }
        expansion_matrix_[static_cast<size_t>(k)] = M;
        qr_[static_cast<size_t>(k)].compute(M);
    }
}

std::pair<int, int> HallBasis::degree_range(int k) const {
    if (k < 1 || k > N_) return {0, 0};
    return {degree_first_[static_cast<size_t>(k)], degree_first_[static_cast<size_t>(k + 1)]};
}

std::string HallBasis::bracket_string(int i) const {
    const auto [l, r] = children_[static_cast<size_t>(i)];
    if (l < 0) return std::to_string(words_[static_cast<size_t>(i)][0]);
    return "[" + bracket_string(l) + "," + bracket_string(r) + "]";
}

Eigen::VectorXd HallBasis::project(const TruncatedTensor& lie, double* residual) const {
    if (lie.d() != d_ || lie.N() != N_)
        throw std::invalid_argument("HallBasis::project: shape mismatch");
    Eigen::VectorXd coords(n());
    double res2 = lie.scalar() * lie.scalar();
    for (int k = 1; k <= N_; ++k) {
        const auto [first, last] = degree_range(k);
        const int mk = last - first;
        const auto blk = lie.level_span(k);
        Eigen::Map<const Eigen::VectorXd> xk(blk.data(), static_cast<Eigen::Index>(blk.size()));
        if (mk == 0) {
            res2 += xk.squaredNorm();
            continue;
        }
        const Eigen::VectorXd ck = qr_[static_cast<size_t>(k)].solve(xk);
        coords.segment(first, mk) = ck;
        res2 += (expansion_matrix_[static_cast<size_t>(k)] * ck - xk).squaredNorm();
    }
    if (residual) *residual = std::sqrt(res2);
    return coords;
}

Eigen::VectorXd HallBasis::project_checked(const TruncatedTensor& lie) const {
    double res = 0.0;
    Eigen::VectorXd c = project(lie, &res);
    if (res > 1e-9 * (1.0 + tensor_norm(lie)))
        throw std::domain_error("HallBasis::project: input is not a Lie element (residual " +
                                std::to_string(res) + ")");
    return c;
}

TruncatedTensor HallBasis::expand(const Eigen::VectorXd& coords) const {
    if (coords.size() != n()) throw std::invalid_argument("HallBasis::expand: wrong length");
    TruncatedTensor out(d_, N_);
    for (int i = 0; i < n(); ++i) {
        const double c = coords(i);
        if (c != 0.0) out.axpy(c, expansions_[static_cast<size_t>(i)]);
    }
    return out;
}

nlohmann::json HallBasis::to_json() const {
    nlohmann::json j;
    j["d"] = d_;
    j["N"] = N_;
    j["n"] = n();
    j["layer_dims"] = layer_dims(d_, N_);
    auto brackets = nlohmann::json::array();
    for (int i = 0; i < n(); ++i) brackets.push_back(bracket_string(i));
    j["brackets"] = brackets;
    return j;
}

std::shared_ptr<const HallBasis> get_hall_basis(int d, int N) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const HallBasis>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{d, N}];
    if (!slot) slot = std::make_shared<HallBasis>(d, N);
    return slot;
}

}  // namespace carnot
