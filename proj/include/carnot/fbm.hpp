#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace carnot {

// Fractional Brownian motion covariance (s^2H + t^2H - |t-s|^2H) / 2.
double fbm_cov(double s, double t, double H);

// Sampled trajectories on a fixed grid; data laid out [sample][grid][coord].
struct FbmBatch {
    double H = 0.5;
    std::vector<double> grid;  // strictly increasing, all > 0
    int d = 1;
    int64_t count = 0;
    uint64_t seed = 0;
    std::vector<double> data;

    double value(int64_t sample, int j, int coord) const {
        return data[static_cast<size_t>((sample * static_cast<int64_t>(grid.size()) + j) * d + coord)];
    }
    double* sample_ptr(int64_t sample) {
        return data.data() + static_cast<size_t>(sample * static_cast<int64_t>(grid.size()) * d);
    }
    const double* sample_ptr(int64_t sample) const {
        return data.data() + static_cast<size_t>(sample * static_cast<int64_t>(grid.size()) * d);
    }
};

std::vector<double> uniform_grid(int steps, double T);

// Exact sampler on an arbitrary grid via Cholesky factorization of the
// covariance matrix. Grid length is capped (dense factorization).
FbmBatch sample_fbm_cholesky(const std::vector<double>& grid, double H, int d, int64_t count,
                             uint64_t seed, int threads = 0);

// Davies-Harte circulant embedding of fractional Gaussian noise on a uniform
// grid; falls back to Cholesky (with a notice on stderr) if an embedding
// eigenvalue is negative.
FbmBatch sample_fbm_circulant(int steps, double T, double H, int d, int64_t count,
                              uint64_t seed, int threads = 0, bool* used_fallback = nullptr);

// Streaming per-sample generator on a uniform grid; sample_path is const and
// thread-safe, each sample index owns its RNG streams.
class FbmPathSampler {
public:
    FbmPathSampler(int steps, double T, double H, int d, uint64_t seed);
    ~FbmPathSampler();

    int steps() const;
    int dim() const;
    double T() const;
    double H() const;
    bool circulant() const;  // false: Cholesky backend

    // out: steps x d row-major values of the path at grid points (t > 0).
    void sample_path(int64_t sample_index, double* out) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

void write_fbm_csv(const std::string& filename, const FbmBatch& b);
void write_fbm_bin(const std::string& filename, const FbmBatch& b);
FbmBatch read_fbm_bin(const std::string& filename);

}  // namespace carnot
