#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace rhc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Bad caller input: dimension mismatch, unknown option, invalid configuration.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Linear algebra breakdown that survived jitter escalation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A rollout produced non-finite states (divergence).
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Derive an independent stream seed from a base seed and a list of tags.
/// Stable across platforms (splitmix64 mixing), so seeds in config files
/// reproduce the same streams everywhere.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0)
{
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    return h;
}

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw ArgumentError(what);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace rhc
