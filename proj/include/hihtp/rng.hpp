#ifndef HIHTP_RNG_HPP
#define HIHTP_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hihtp {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds a tuple of integers into a 64-bit key. Any change in any component
/// gives an unrelated key, so streams keyed this way are independent of the
/// order in which they are consumed.
inline constexpr std::uint64_t derive_key(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

/// Named substreams of a trial.
enum class Stream : std::uint64_t {
    filter = 1,
    message = 2,
    spreading = 3,
    mixing = 4,
    activity = 5,
    hirip = 6,
    codebook = 7,
};

inline std::uint64_t stream_key(std::uint64_t trial_seed, Stream s, std::uint64_t index = 0) noexcept {
    return derive_key(trial_seed, {static_cast<std::uint64_t>(s), index});
}

using Engine = std::mt19937_64;

}  // namespace hihtp

#endif  // HIHTP_RNG_HPP
