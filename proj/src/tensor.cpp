#include "carnot/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace carnot {

namespace {
constexpr double kScalarTol = 1e-9;
}

TruncatedTensor::TruncatedTensor(int d, int N) : d_(d), N_(N) {
    if (d < 1) throw std::invalid_argument("TruncatedTensor: d must be >= 1");
    if (N < 1) throw std::invalid_argument("TruncatedTensor: N must be >= 1");
    sizes_.resize(static_cast<size_t>(N) + 1);
    offsets_.resize(static_cast<size_t>(N) + 1);
    int64_t size = 1, off = 0;
    for (int k = 0; k <= N; ++k) {
        sizes_[static_cast<size_t>(k)] = size;
        offsets_[static_cast<size_t>(k)] = off;
        off += size;
        size *= d;
    }
    data_.assign(static_cast<size_t>(off), 0.0);
}

TruncatedTensor TruncatedTensor::unit(int d, int N) {
    TruncatedTensor t(d, N);
    t.data_[0] = 1.0;
    return t;
}

int64_t word_index(std::span<const int> word, int d) {
    int64_t idx = 0;
    for (int letter : word) {
        if (letter < 1 || letter > d) throw std::out_of_range("word letter outside 1..d");
        idx = idx * d + (letter - 1);
    }
    return idx;
}

double& TruncatedTensor::coeff(std::span<const int> word) {
    const int k = static_cast<int>(word.size());
    if (k > N_) throw std::out_of_range("word longer than truncation level");
    return data_[static_cast<size_t>(level_offset(k) + word_index(word, d_))];
}

double TruncatedTensor::coeff(std::span<const int> word) const {
    return const_cast<TruncatedTensor*>(this)->coeff(word);
}

void TruncatedTensor::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool TruncatedTensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

TruncatedTensor& TruncatedTensor::operator+=(const TruncatedTensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("tensor shape mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

TruncatedTensor& TruncatedTensor::operator-=(const TruncatedTensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("tensor shape mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

TruncatedTensor& TruncatedTensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

TruncatedTensor& TruncatedTensor::axpy(double s, const TruncatedTensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("tensor shape mismatch");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
    return *this;
}

void tensor_mul_into(TruncatedTensor& dst, const TruncatedTensor& a, const TruncatedTensor& b) {
    if (!a.same_shape(b) || !dst.same_shape(a))
        throw std::invalid_argument("tensor_mul: shape mismatch");
    if (&dst == &a || &dst == &b) throw std::invalid_argument("tensor_mul_into: dst aliases input");
    dst.set_zero();
    const int N = a.N();
    for (int k = 0; k <= N; ++k) {
        double* out = dst.level(k);
        for (int i = 0; i <= k; ++i) {
            const int j = k - i;
            const double* ai = a.level(i);
            const double* bj = b.level(j);
            const int64_t ni = a.level_size(i);
            const int64_t nj = a.level_size(j);
            for (int64_t x = 0; x < ni; ++x) {
                const double ax = ai[x];
                if (ax == 0.0) continue;
                double* row = out + x * nj;
                for (int64_t y = 0; y < nj; ++y) row[y] += ax * bj[y];
            }
        }
    }
}

TruncatedTensor tensor_mul(const TruncatedTensor& a, const TruncatedTensor& b) {
    TruncatedTensor dst(a.d(), a.N());
    tensor_mul_into(dst, a, b);
    return dst;
}

TruncatedTensor tensor_exp(const TruncatedTensor& z) {
    if (std::abs(z.scalar()) > kScalarTol)
        throw std::invalid_argument("tensor_exp: nonzero scalar part");
    TruncatedTensor result = TruncatedTensor::unit(z.d(), z.N());
    TruncatedTensor power = TruncatedTensor::unit(z.d(), z.N());
    TruncatedTensor tmp(z.d(), z.N());
    for (int k = 1; k <= z.N(); ++k) {
        tensor_mul_into(tmp, power, z);
        tmp *= 1.0 / static_cast<double>(k);
        std::swap(power, tmp);
        result += power;
    }
    return result;
}

TruncatedTensor tensor_log(const TruncatedTensor& x) {
    if (std::abs(x.scalar() - 1.0) > kScalarTol)
        throw std::invalid_argument("tensor_log: scalar part must be 1");
    TruncatedTensor y = x;  // y = x - 1, nilpotent
    y.data()[0] = 0.0;
    TruncatedTensor result = y;
    TruncatedTensor power = y;
    TruncatedTensor tmp(x.d(), x.N());
    double sign = 1.0;
    for (int k = 2; k <= x.N(); ++k) {
        tensor_mul_into(tmp, power, y);
        std::swap(power, tmp);
        sign = -sign;
        result.axpy(sign / static_cast<double>(k), power);
    }
    return result;
}

TruncatedTensor tensor_inverse(const TruncatedTensor& x) {
    if (std::abs(x.scalar() - 1.0) > kScalarTol)
        throw std::invalid_argument("tensor_inverse: scalar part must be 1");
    TruncatedTensor z = tensor_log(x);
    z *= -1.0;
    return tensor_exp(z);
}

double tensor_word_coeff(const TruncatedTensor& x, std::span<const int> word) {
    return x.coeff(word);
}

double tensor_max_abs(const TruncatedTensor& x) {
    double m = 0.0;
    for (double v : x.data()) m = std::max(m, std::abs(v));
    return m;
}

double tensor_norm(const TruncatedTensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v * v;
    return std::sqrt(s);
}

}  // namespace carnot
