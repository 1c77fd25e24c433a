#include "carnot/fbm.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "carnot/parallel.hpp"
#include "carnot/rng.hpp"

namespace carnot {

namespace {

void check_h(double H) {
    if (!(H > 0.0 && H < 1.0)) throw std::invalid_argument("Hurst parameter must be in (0,1)");
}

void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("fbm grid is empty");
    double prev = 0.0;
    for (double t : grid) {
        if (!(t > prev)) throw std::invalid_argument("fbm grid must be strictly increasing and > 0");
        prev = t;
    }
}

constexpr int64_t kSampleChunk = 1024;

}  // namespace

double fbm_cov(double s, double t, double H) {
    check_h(H);
    if (s < 0.0 || t < 0.0) throw std::invalid_argument("fbm_cov: times must be >= 0");
    return 0.5 * (std::pow(s, 2.0 * H) + std::pow(t, 2.0 * H) - std::pow(std::abs(t - s), 2.0 * H));
}

std::vector<double> uniform_grid(int steps, double T) {
    if (steps < 1 || !(T > 0.0)) throw std::invalid_argument("uniform_grid: bad arguments");
    std::vector<double> g(static_cast<size_t>(steps));
    for (int j = 0; j < steps; ++j) g[static_cast<size_t>(j)] = T * static_cast<double>(j + 1) / steps;
    return g;
}

namespace {

Eigen::MatrixXd gram_matrix(const std::vector<double>& grid, double H) {
    const auto m = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd G(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = fbm_cov(grid[static_cast<size_t>(i)], grid[static_cast<size_t>(j)], H);
            G(i, j) = v;
            G(j, i) = v;
        }
    return G;
}

// Square root of the Davies-Harte embedding eigenvalues, scaled so that a
// forward FFT of sqrt_eig[k] * (a_k + i b_k) yields two independent
// unit-spacing fGn vectors in its real and imaginary parts.
struct CirculantEmbedding {
    int M = 0;
    std::vector<double> sqrt_eig;  // length 2M
    bool ok = false;
};

CirculantEmbedding build_embedding(int M, double H) {
    CirculantEmbedding emb;
    emb.M = M;
    const int n = 2 * M;
    auto gamma = [H](int64_t k) {
        const double a = static_cast<double>(std::abs(k));
        return 0.5 * (std::pow(a + 1.0, 2.0 * H) - 2.0 * std::pow(a, 2.0 * H) +
                      std::pow(std::abs(a - 1.0), 2.0 * H));
    };
    std::vector<std::complex<double>> c(static_cast<size_t>(n));
    for (int j = 0; j <= M; ++j) c[static_cast<size_t>(j)] = gamma(j);
    for (int j = 1; j < M; ++j) c[static_cast<size_t>(2 * M - j)] = gamma(j);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> lambda(static_cast<size_t>(n));
    fft.fwd(lambda, c);
    emb.sqrt_eig.resize(static_cast<size_t>(n));
    double max_ev = 0.0;
    for (const auto& l : lambda) max_ev = std::max(max_ev, l.real());
    const double tol = -1e-10 * std::max(1.0, max_ev);
    for (int k = 0; k < n; ++k) {
        double ev = lambda[static_cast<size_t>(k)].real();
        if (ev < tol) return emb;  // not nonnegative definite
        if (ev < 0.0) ev = 0.0;
        emb.sqrt_eig[static_cast<size_t>(k)] = std::sqrt(ev / static_cast<double>(n));
    }
    emb.ok = true;
    return emb;
}

// Fills two unit-spacing fGn vectors of length M from one stream.
void embedding_sample_pair(const CirculantEmbedding& emb, RngStream& rng, double* fgn_a,
                           double* fgn_b) {
    const int n = 2 * emb.M;
    thread_local Eigen::FFT<double> fft;
    thread_local std::vector<std::complex<double>> freq, time;
    freq.resize(static_cast<size_t>(n));
    time.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double re = rng.normal();
        const double im = rng.normal();
        freq[static_cast<size_t>(k)] = std::complex<double>(re, im) * emb.sqrt_eig[static_cast<size_t>(k)];
    }
    fft.fwd(time, freq);
    for (int j = 0; j < emb.M; ++j) {
        fgn_a[j] = time[static_cast<size_t>(j)].real();
        fgn_b[j] = time[static_cast<size_t>(j)].imag();
    }
}

}  // namespace

FbmBatch sample_fbm_cholesky(const std::vector<double>& grid, double H, int d, int64_t count,
                             uint64_t seed, int threads) {
    check_h(H);
    check_grid(grid);
    if (d < 1 || count < 1) throw std::invalid_argument("sample_fbm_cholesky: bad d or count");
    if (grid.size() > 4096)
        throw std::invalid_argument("sample_fbm_cholesky: grid too long for dense factorization");

    const auto m = static_cast<Eigen::Index>(grid.size());
    Eigen::LLT<Eigen::MatrixXd> llt(gram_matrix(grid, H));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("sample_fbm_cholesky: covariance factorization failed (near-degenerate grid)");
    const Eigen::MatrixXd L = llt.matrixL();

    FbmBatch batch;
    batch.H = H;
    batch.grid = grid;
    batch.d = d;
    batch.count = count;
    batch.seed = seed;
    batch.data.assign(static_cast<size_t>(count * m * d), 0.0);

    parallel_chunks(count, kSampleChunk, threads, [&](int64_t, int64_t begin, int64_t end) {
        Eigen::VectorXd z(m), x(m);
        for (int64_t s = begin; s < end; ++s) {
            double* out = batch.sample_ptr(s);
            for (int c = 0; c < d; ++c) {
                RngStream rng(seed, static_cast<uint64_t>(s), static_cast<uint64_t>(c));
                for (Eigen::Index j = 0; j < m; ++j) z(j) = rng.normal();
                x.noalias() = L * z;
                for (Eigen::Index j = 0; j < m; ++j) out[j * d + c] = x(j);
            }
        }
    });
    return batch;
}

FbmBatch sample_fbm_circulant(int steps, double T, double H, int d, int64_t count,
                              uint64_t seed, int threads, bool* used_fallback) {
    check_h(H);
    if (steps < 1 || !(T > 0.0) || d < 1 || count < 1)
        throw std::invalid_argument("sample_fbm_circulant: bad arguments");
    if (used_fallback) *used_fallback = false;

    const CirculantEmbedding emb = build_embedding(steps, H);
    if (!emb.ok) {
        std::cerr << "sample_fbm_circulant: negative embedding eigenvalue, using Cholesky fallback\n";
        if (used_fallback) *used_fallback = true;
        return sample_fbm_cholesky(uniform_grid(steps, T), H, d, count, seed, threads);
    }

    FbmBatch batch;
    batch.H = H;
    batch.grid = uniform_grid(steps, T);
    batch.d = d;
    batch.count = count;
    batch.seed = seed;
    batch.data.assign(static_cast<size_t>(count) * static_cast<size_t>(steps) * static_cast<size_t>(d), 0.0);
    const double scale = std::pow(T / steps, H);
    const int pairs = (d + 1) / 2;

    parallel_chunks(count, kSampleChunk, threads, [&](int64_t, int64_t begin, int64_t end) {
        std::vector<double> fa(static_cast<size_t>(steps)), fb(static_cast<size_t>(steps));
        for (int64_t s = begin; s < end; ++s) {
            double* out = batch.sample_ptr(s);
            for (int p = 0; p < pairs; ++p) {
                RngStream rng(seed, static_cast<uint64_t>(s), static_cast<uint64_t>(p));
                embedding_sample_pair(emb, rng, fa.data(), fb.data());
                const int c0 = 2 * p;
                double acc = 0.0;
                for (int j = 0; j < steps; ++j) {
                    acc += fa[static_cast<size_t>(j)];
                    out[j * d + c0] = scale * acc;
                }
                if (c0 + 1 < d) {
                    acc = 0.0;
                    for (int j = 0; j < steps; ++j) {
                        acc += fb[static_cast<size_t>(j)];
                        out[j * d + c0 + 1] = scale * acc;
                    }
                }
            }
        }
    });
    return batch;
}

struct FbmPathSampler::Impl {
    int steps = 0;
    int d = 1;
    double T = 1.0;
    double H = 0.5;
    uint64_t seed = 0;
    bool use_circulant = false;
    CirculantEmbedding emb;
    double scale = 1.0;          // circulant increment scale
    Eigen::MatrixXd L;           // Cholesky factor
    std::vector<double> grid;
};

FbmPathSampler::FbmPathSampler(int steps, double T, double H, int d, uint64_t seed)
    : impl_(std::make_unique<Impl>()) {
    check_h(H);
    if (steps < 1 || !(T > 0.0) || d < 1)
        throw std::invalid_argument("FbmPathSampler: bad arguments");
    impl_->steps = steps;
    impl_->d = d;
    impl_->T = T;
    impl_->H = H;
    impl_->seed = seed;
    impl_->grid = uniform_grid(steps, T);
    impl_->emb = build_embedding(steps, H);
    impl_->use_circulant = impl_->emb.ok;
    impl_->scale = std::pow(T / steps, H);
    if (!impl_->use_circulant) {
        std::cerr << "FbmPathSampler: negative embedding eigenvalue, using Cholesky backend\n";
        Eigen::LLT<Eigen::MatrixXd> llt(gram_matrix(impl_->grid, H));
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("FbmPathSampler: covariance factorization failed");
        impl_->L = llt.matrixL();
    }
}

FbmPathSampler::~FbmPathSampler() = default;

int FbmPathSampler::steps() const { return impl_->steps; }
int FbmPathSampler::dim() const { return impl_->d; }
double FbmPathSampler::T() const { return impl_->T; }
double FbmPathSampler::H() const { return impl_->H; }
bool FbmPathSampler::circulant() const { return impl_->use_circulant; }

void FbmPathSampler::sample_path(int64_t sample_index, double* out) const {
    const Impl& im = *impl_;
    const int steps = im.steps, d = im.d;
    if (im.use_circulant) {
        thread_local std::vector<double> fa, fb;
        fa.resize(static_cast<size_t>(steps));
        fb.resize(static_cast<size_t>(steps));
        const int pairs = (d + 1) / 2;
        for (int p = 0; p < pairs; ++p) {
            RngStream rng(im.seed, static_cast<uint64_t>(sample_index), static_cast<uint64_t>(p));
            embedding_sample_pair(im.emb, rng, fa.data(), fb.data());
            const int c0 = 2 * p;
            double acc = 0.0;
            for (int j = 0; j < steps; ++j) {
                acc += fa[static_cast<size_t>(j)];
                out[j * d + c0] = im.scale * acc;
            }
            if (c0 + 1 < d) {
                acc = 0.0;
                for (int j = 0; j < steps; ++j) {
                    acc += fb[static_cast<size_t>(j)];
                    out[j * d + c0 + 1] = im.scale * acc;
                }
            }
        }
    } else {
        thread_local Eigen::VectorXd z, x;
        z.resize(steps);
        for (int c = 0; c < d; ++c) {
            RngStream rng(im.seed, static_cast<uint64_t>(sample_index), static_cast<uint64_t>(c));
            for (int j = 0; j < steps; ++j) z(j) = rng.normal();
            x.noalias() = im.L * z;
            for (int j = 0; j < steps; ++j) out[j * d + c] = x(j);
        }
    }
}

void write_fbm_csv(const std::string& filename, const FbmBatch& b) {
    std::FILE* f = std::fopen(filename.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write fbm CSV: " + filename);
    std::fprintf(f, "sample,t");
    for (int c = 1; c <= b.d; ++c) std::fprintf(f, ",x%d", c);
    std::fprintf(f, "\n");
    for (int64_t s = 0; s < b.count; ++s)
        for (size_t j = 0; j < b.grid.size(); ++j) {
            std::fprintf(f, "%lld,%.17g", static_cast<long long>(s), b.grid[j]);
            for (int c = 0; c < b.d; ++c)
                std::fprintf(f, ",%.17g", b.value(s, static_cast<int>(j), c));
            std::fprintf(f, "\n");
        }
    std::fclose(f);
}

namespace {
constexpr char kFbmMagic[4] = {'C', 'F', 'B', 'M'};
constexpr uint32_t kFbmVersion = 1;
}  // namespace

void write_fbm_bin(const std::string& filename, const FbmBatch& b) {
    std::ofstream f(filename, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write fbm dump: " + filename);
    f.write(kFbmMagic, 4);
    const uint32_t version = kFbmVersion;
    const auto steps = static_cast<uint32_t>(b.grid.size());
    const auto d = static_cast<uint32_t>(b.d);
    const auto count = static_cast<uint64_t>(b.count);
    f.write(reinterpret_cast<const char*>(&version), sizeof version);
    f.write(reinterpret_cast<const char*>(&b.H), sizeof b.H);
    f.write(reinterpret_cast<const char*>(&d), sizeof d);
    f.write(reinterpret_cast<const char*>(&steps), sizeof steps);
    f.write(reinterpret_cast<const char*>(&count), sizeof count);
    f.write(reinterpret_cast<const char*>(&b.seed), sizeof b.seed);
    f.write(reinterpret_cast<const char*>(b.grid.data()),
            static_cast<std::streamsize>(b.grid.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(b.data.data()),
            static_cast<std::streamsize>(b.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("short write on fbm dump: " + filename);
}

FbmBatch read_fbm_bin(const std::string& filename) {
    std::ifstream f(filename, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open fbm dump: " + filename);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kFbmMagic, 4) != 0)
        throw std::runtime_error("not an fbm dump: " + filename);
    uint32_t version = 0, d = 0, steps = 0;
    uint64_t count = 0;
    FbmBatch b;
    f.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != kFbmVersion) throw std::runtime_error("unsupported fbm dump version");
    f.read(reinterpret_cast<char*>(&b.H), sizeof b.H);
    f.read(reinterpret_cast<char*>(&d), sizeof d);
    f.read(reinterpret_cast<char*>(&steps), sizeof steps);
    f.read(reinterpret_cast<char*>(&count), sizeof count);
    f.read(reinterpret_cast<char*>(&b.seed), sizeof b.seed);
    b.d = static_cast<int>(d);
    b.count = static_cast<int64_t>(count);
    b.grid.resize(steps);
    f.read(reinterpret_cast<char*>(b.grid.data()),
           static_cast<std::streamsize>(steps * sizeof(double)));
    b.data.resize(static_cast<size_t>(count) * steps * d);
    f.read(reinterpret_cast<char*>(b.data.data()),
           static_cast<std::streamsize>(b.data.size() * sizeof(double)));
    if (!f) throw std::runtime_error("truncated fbm dump: " + filename);
    return b;
}

}  // namespace carnot
