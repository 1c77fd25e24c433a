#include "carnot/signature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace carnot {

namespace {

void sig_segment_into(TruncatedTensor& out, const double* v, int d, int N) {
    out.set_zero();
    out.data()[0] = 1.0;
    double* prev = out.level(1);
    for (int i = 0; i < d; ++i) prev[i] = v[i];
    for (int k = 2; k <= N; ++k) {
        const double* lo = out.level(k - 1);
        double* hi = out.level(k);
        const int64_t nlo = out.level_size(k - 1);
        const double inv_k = 1.0 / static_cast<double>(k);
        for (int64_t x = 0; x < nlo; ++x) {
            const double ax = lo[x] * inv_k;
            double* row = hi + x * d;
            for (int i = 0; i < d; ++i) row[i] = ax * v[i];
        }
    }
}

}  // namespace

TruncatedTensor sig_segment(const Eigen::VectorXd& v, int N) {
    if (!v.allFinite()) throw std::invalid_argument("sig_segment: non-finite increment");
    TruncatedTensor out(static_cast<int>(v.size()), N);
    sig_segment_into(out, v.data(), static_cast<int>(v.size()), N);
    return out;
}

SignatureAccumulator::SignatureAccumulator(int d, int N)
    : acc_(TruncatedTensor::unit(d, N)), seg_(d, N), tmp_(d, N) {}

void SignatureAccumulator::reset() {
    acc_.set_zero();
    acc_.data()[0] = 1.0;
}

void SignatureAccumulator::push_increment(const double* v) {
    sig_segment_into(seg_, v, acc_.d(), acc_.N());
    tensor_mul_into(tmp_, acc_, seg_);
    std::swap(acc_, tmp_);
}

void SignatureAccumulator::push_increment(const Eigen::VectorXd& v) {
    if (v.size() != acc_.d()) throw std::invalid_argument("push_increment: wrong dimension");
    push_increment(v.data());
}

TruncatedTensor sig_pl_path(const PLPath& p, int N) {
    p.validate();
    SignatureAccumulator acc(p.dim(), N);
    Eigen::VectorXd v(p.dim());
    for (int j = 0; j < p.segments(); ++j) {
        v = p.increment(j);
        acc.push_increment(v.data());
    }
    return acc.signature();
}

GroupElement log_sig_pl_path(const PLPath& p, std::shared_ptr<const HallBasis> basis) {
    if (p.dim() != basis->d())
        throw std::invalid_argument("log_sig_pl_path: path dimension does not match basis");
    const TruncatedTensor sig = sig_pl_path(p, basis->N());
    GroupElement out;
    out.coords = basis->project_checked(tensor_log(sig));
    out.basis = std::move(basis);
    return out;
}

double iterated_integral_word(const PLPath& p, std::span<const int> word) {
    p.validate();
    const int k = static_cast<int>(word.size());
    if (k == 0) return 1.0;
    for (int letter : word)
        if (letter < 1 || letter > p.dim())
            throw std::out_of_range("iterated_integral_word: letter outside 1..d");

    // Per segment, level j is a polynomial in the segment parameter; each
    // level integrates the one below against the constant segment velocity.
    std::vector<double> start(static_cast<size_t>(k) + 1, 0.0);
    start[0] = 1.0;
    std::vector<std::vector<double>> poly(static_cast<size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) poly[static_cast<size_t>(j)].resize(static_cast<size_t>(j) + 1);

    for (int s = 0; s < p.segments(); ++s) {
        const Eigen::VectorXd dx = p.increment(s);
        poly[0][0] = 1.0;
        for (int j = 1; j <= k; ++j) {
            auto& pj = poly[static_cast<size_t>(j)];
            const auto& lo = poly[static_cast<size_t>(j - 1)];
            pj[0] = start[static_cast<size_t>(j)];
            const double vel = dx(word[static_cast<size_t>(j - 1)] - 1);
            for (int m = 0; m < j; ++m)
                pj[static_cast<size_t>(m + 1)] = vel * lo[static_cast<size_t>(m)] / static_cast<double>(m + 1);
        }
        for (int j = 1; j <= k; ++j) {
            double v = 0.0;
            for (double c : poly[static_cast<size_t>(j)]) v += c;  // evaluate at 1
            start[static_cast<size_t>(j)] = v;
        }
    }
    return start[static_cast<size_t>(k)];
}

namespace {

BracketTree right_nested_bracket(std::span<const int> word) {
    BracketTree t = BracketTree::leaf(word.back());
    for (int j = static_cast<int>(word.size()) - 2; j >= 0; --j)
        t = BracketTree::node(BracketTree::leaf(word[static_cast<size_t>(j)]),
                              std::move(t));
    return t;
}

int descents(std::span<const int> sigma) {
    int e = 0;
    for (size_t j = 0; j + 1 < sigma.size(); ++j)
        if (sigma[j] > sigma[j + 1]) ++e;
    return e;
}

double binom(int n, int r) {
    double v = 1.0;
    for (int i = 0; i < r; ++i) v = v * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return v;
}

}  // namespace

GroupElement chen_strichartz_logsig(const PLPath& p, std::shared_ptr<const HallBasis> basis) {
    if (basis->N() > 3)
        throw std::invalid_argument("chen_strichartz_logsig: supported for N <= 3 only");
    if (p.dim() != basis->d())
        throw std::invalid_argument("chen_strichartz_logsig: dimension mismatch");
    p.validate();

    const int d = basis->d();
    const int N = basis->N();
    TruncatedTensor total(d, N);

    std::vector<int> word;
    for (int k = 1; k <= N; ++k) {
        word.assign(static_cast<size_t>(k), 1);
        while (true) {
            // Lambda_I: permutation sum with descent-count coefficients.
            std::vector<int> sigma(static_cast<size_t>(k));
            std::iota(sigma.begin(), sigma.end(), 1);
            double lambda = 0.0;
            do {
                const int e = descents(sigma);
                std::vector<int> inv(static_cast<size_t>(k));
                for (int j = 0; j < k; ++j) inv[static_cast<size_t>(sigma[static_cast<size_t>(j)] - 1)] = j + 1;
                std::vector<int> permuted(static_cast<size_t>(k));
                for (int j = 0; j < k; ++j)
                    permuted[static_cast<size_t>(j)] = word[static_cast<size_t>(inv[static_cast<size_t>(j)] - 1)];
                const double coeff = ((e % 2 == 0) ? 1.0 : -1.0) /
                                     (static_cast<double>(k) * static_cast<double>(k) * binom(k - 1, e));
                lambda += coeff * iterated_integral_word(p, permuted);
            } while (std::next_permutation(sigma.begin(), sigma.end()));

            if (lambda != 0.0)
                total.axpy(lambda, bracket_to_tensor(right_nested_bracket(word), d, N));

            int pos = k - 1;
            while (pos >= 0 && word[static_cast<size_t>(pos)] == d) {
                word[static_cast<size_t>(pos)] = 1;
                --pos;
            }
            if (pos < 0) break;
            ++word[static_cast<size_t>(pos)];
        }
    }

    GroupElement out;
    out.coords = basis->project_checked(total);
    out.basis = std::move(basis);
    return out;
}

}  // namespace carnot
