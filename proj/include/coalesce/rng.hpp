#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace coalesce {

/// splitmix64 finalizer; the pinned hash used for all seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive combination of several words into one seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) noexcept;

/// Mersenne Twister (mt19937_64, whose output sequence is fixed by the C++
/// standard) with hand-written transforms, so draws do not depend on the
/// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform();
    /// Standard normal, Marsaglia polar method.
    double normal();
    /// Gamma(shape, rate 1), Marsaglia-Tsang squeeze; shapes below 1 use the
    /// u^{1/a} boost.
    double gamma(double shape);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace coalesce
