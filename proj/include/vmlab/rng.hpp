#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vmlab {

// splitmix64: small, fast, and identical on every platform. All randomness
// in the project flows through this so artifacts are bit-reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, n); n must be > 0
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    // uniform in [lo, hi] inclusive
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    template <typename T> void shuffle(std::vector<T> &v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
};

// FNV-1a, 64-bit. Used for feature hashing and record ids.
inline std::uint64_t fnv1a(const void *data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string &s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t fnv1a_byte(unsigned char c, std::uint64_t h) {
    h ^= c;
    h *= 0x100000001b3ULL;
    return h;
}

// Deterministic seed derivation for independent sub-streams.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    Rng r(base ^ (salt * 0x9e3779b97f4a7c15ULL + 0x7f4a7c159e3779b9ULL));
    return r.next();
}

inline std::uint64_t mix_seed(std::uint64_t base, const std::string &salt) {
    return mix_seed(base, fnv1a(salt));
}

} // namespace vmlab
