#pragma once

#include <cstdint>
#include <string_view>

namespace latthom {

namespace detail {

// SplitMix64 finalizer; full-period, passes BigCrush as a counter hash.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Identifies one independent random stream.  Distinct
/// (base_seed, replica_index, purpose) triples give statistically
/// independent streams; identical triples give identical streams,
/// independent of execution order and thread count.
struct StreamKey {
    std::uint64_t base_seed = 0;
    std::uint64_t replica_index = 0;
    std::uint64_t purpose = 0;

    StreamKey() = default;
    StreamKey(std::uint64_t seed, std::uint64_t replica, std::string_view purpose_tag)
        : base_seed(seed), replica_index(replica), purpose(detail::fnv1a(purpose_tag)) {}

    std::uint64_t state() const {
        std::uint64_t s = detail::mix64(base_seed);
        s = detail::mix64(s ^ (0x9e3779b97f4a7c15ULL * (replica_index + 1)));
        s = detail::mix64(s ^ (0xc2b2ae3d27d4eb4fULL * (purpose + 1)));
        return s;
    }
};

/// Counter-based generator: the i-th draw is a pure function of (key, i).
class CounterRng {
  public:
    explicit CounterRng(const StreamKey& key) : state_(key.state()) {}

    std::uint64_t next_u64() { return detail::mix64(state_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_u01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
    std::uint64_t counter_ = 0;
};

}  // namespace latthom
