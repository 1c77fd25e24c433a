#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace carnot {

// Dense element of the truncated tensor algebra over R^d: one coefficient
// block per level k = 0..N, block k indexed by words of length k over
// {1..d} (letter j contributes (j-1)*d^(k-pos-1)). Products of total degree
// above N are dropped by construction.
class TruncatedTensor {
public:
    TruncatedTensor(int d, int N);

    static TruncatedTensor unit(int d, int N);

    int d() const { return d_; }
    int N() const { return N_; }

    int64_t level_size(int k) const { return sizes_[static_cast<size_t>(k)]; }
    int64_t level_offset(int k) const { return offsets_[static_cast<size_t>(k)]; }
    int64_t total_size() const { return static_cast<int64_t>(data_.size()); }

    double* level(int k) { return data_.data() + level_offset(k); }
    const double* level(int k) const { return data_.data() + level_offset(k); }

    std::span<double> level_span(int k) {
        return {level(k), static_cast<size_t>(level_size(k))};
    }
    std::span<const double> level_span(int k) const {
        return {level(k), static_cast<size_t>(level_size(k))};
    }

    double scalar() const { return data_[0]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    // Coefficient of the word (letters in 1..d); the empty word gives the
    // scalar part.
    double& coeff(std::span<const int> word);
    double coeff(std::span<const int> word) const;

    void set_zero();
    bool same_shape(const TruncatedTensor& o) const { return d_ == o.d_ && N_ == o.N_; }
    bool all_finite() const;

    TruncatedTensor& operator+=(const TruncatedTensor& o);
    TruncatedTensor& operator-=(const TruncatedTensor& o);
    TruncatedTensor& operator*=(double s);
    // this += s * o
    TruncatedTensor& axpy(double s, const TruncatedTensor& o);

private:
    int d_, N_;
    std::vector<int64_t> sizes_, offsets_;
    std::vector<double> data_;
};

int64_t word_index(std::span<const int> word, int d);

// dst = a (x) b truncated at level N; dst must not alias a or b.
void tensor_mul_into(TruncatedTensor& dst, const TruncatedTensor& a, const TruncatedTensor& b);
TruncatedTensor tensor_mul(const TruncatedTensor& a, const TruncatedTensor& b);

// exp(z) = sum_{k=0..N} z^k / k!; requires zero scalar part.
TruncatedTensor tensor_exp(const TruncatedTensor& z);

// log(x) = sum_{k=1..N} (-1)^{k+1} (x-1)^k / k; requires scalar part 1.
TruncatedTensor tensor_log(const TruncatedTensor& x);

// Group inverse of an element with scalar part 1, as exp(-log x).
TruncatedTensor tensor_inverse(const TruncatedTensor& x);

double tensor_word_coeff(const TruncatedTensor& x, std::span<const int> word);

double tensor_max_abs(const TruncatedTensor& x);
double tensor_norm(const TruncatedTensor& x);  // Euclidean over all coefficients

}  // namespace carnot
