#pragma once

#include <cmath>
#include <cstdint>

namespace carnot {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Counter-based stream: Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). A draw is a pure function of
// (master seed, stream id, counter), so chunked parallel runs and serial
// runs produce identical numbers for the same stream layout.
class RngStream {
public:
    RngStream(uint64_t master_seed, uint64_t stream_id)
        : block_(0), pos_(4), have_normal_(false), cached_normal_(0.0) {
        const uint64_t k = splitmix64(master_seed ^ splitmix64(stream_id));
        key0_ = static_cast<uint32_t>(k);
        key1_ = static_cast<uint32_t>(k >> 32);
        const uint64_t salt = splitmix64(k ^ 0xA3EC4E7D9C1B0F52ULL);
        salt0_ = static_cast<uint32_t>(salt);
        salt1_ = static_cast<uint32_t>(salt >> 32);
    }

    // Convenience for nested stream ids, e.g. (sample, coordinate).
    RngStream(uint64_t master_seed, uint64_t a, uint64_t b)
        : RngStream(master_seed, splitmix64(a) ^ (b * 0xD6E8FEB86659FD93ULL + 0x2545F4914F6CDD1DULL)) {}

    uint32_t next_u32() {
        if (pos_ == 4) {
            philox_block();
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    uint64_t next_u64() {
        const uint64_t lo = next_u32();
        const uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on (0,1), never exactly 0 or 1.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; pairs are cached.
    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return cached_normal_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_normal_ = r * std::sin(a);
        have_normal_ = true;
        return r * std::cos(a);
    }

private:
    static void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
        const uint64_t p = static_cast<uint64_t>(a) * b;
        hi = static_cast<uint32_t>(p >> 32);
        lo = static_cast<uint32_t>(p);
    }

    void philox_block() {
        uint32_t x0 = static_cast<uint32_t>(block_);
        uint32_t x1 = static_cast<uint32_t>(block_ >> 32);
        uint32_t x2 = salt0_;
        uint32_t x3 = salt1_;
        uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            uint32_t hi0, lo0, hi1, lo1;
            mulhilo(0xD2511F53u, x0, hi0, lo0);
            mulhilo(0xCD9E8D57u, x2, hi1, lo1);
            const uint32_t y0 = hi1 ^ x1 ^ k0;
            const uint32_t y1 = lo1;
            const uint32_t y2 = hi0 ^ x3 ^ k1;
            const uint32_t y3 = lo0;
            x0 = y0; x1 = y1; x2 = y2; x3 = y3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        buf_[0] = x0; buf_[1] = x1; buf_[2] = x2; buf_[3] = x3;
        ++block_;
    }

    uint32_t key0_, key1_, salt0_, salt1_;
    uint64_t block_;
    uint32_t buf_[4];
    int pos_;
    bool have_normal_;
    double cached_normal_;
};

}  // namespace carnot
