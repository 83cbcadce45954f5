#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cmpx {

/// A point in the ambient configuration space.
using Config = Eigen::VectorXd;
/// Coordinates in the tangent space of a chart.
using TangentCoord = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using Rng = std::mt19937_64;

/// Thrown when a caller violates a documented precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Thrown when a numeric routine cannot produce a finite answer.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Atlas ran out of chart slots.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Jacobian rank deficiency where a full-rank tangent space was required.
class DegeneratePointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scene or problem generation could not satisfy its constraints.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A rejection sampler exhausted its budget.
class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or parsed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& v) { return v.allFinite(); }

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
{
    return mix_seed(mix_seed(mix_seed(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// Uniform double in [0, 1) built from the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    if (n == 0)
        throw ContractError("uniform_index: empty range");
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Standard normal via Box-Muller; deterministic for a given generator state.
inline double standard_normal(Rng& rng)
{
    double u1 = uniform01(rng);
    while (u1 <= 0.0)
        u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace cmpx
