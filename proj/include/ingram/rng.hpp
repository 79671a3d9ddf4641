#pragma once

#include <cstdint>
#include <vector>

namespace ingram {

inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Combines two seeds into one, order-sensitive.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a;
    uint64_t h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return splitmix64(s);
}

// xoshiro256++ seeded through splitmix64. Self-contained so that streams are
// bit-identical across compilers and standard libraries; reproducible
// checkpoints depend on this.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    int64_t uniform_int(int64_t n) {
        const uint64_t un = uint64_t(n);
        const uint64_t bound = un == 0 ? 0 : (~uint64_t(0) - (~uint64_t(0) % un + 1) % un);
        uint64_t x = next_u64();
        while (x > bound) x = next_u64();
        return int64_t(x % un);
    }

    bool coin() { return (next_u64() >> 63) != 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(uniform_int(int64_t(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream derived from the current state and a stream id.
    Rng fork(uint64_t stream) {
        return Rng(mix_seed(next_u64(), stream));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

}  // namespace ingram
