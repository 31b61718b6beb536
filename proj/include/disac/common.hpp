#pragma once

// Shared constants, unit conversions and small utilities used across the
// library. Everything is header-only; all quantities are SI unless a name
// says otherwise (angles in radians, powers linear unless suffixed _db).

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace disac {

using cxd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Speed of light [m/s].
inline constexpr double speed_of_light = 299'792'458.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double lin) {
    if (lin <= 0.0)
        throw std::invalid_argument("linear_to_db: non-positive value " + std::to_string(lin));
    return 10.0 * std::log10(lin);
}

/// Deterministic stream splitting: derives an independent sub-seed from a
/// master seed and a stream index (SplitMix64 finalizer over the pair).
/// Used everywhere a component needs its own RNG stream so that parallel
/// evaluation order cannot change results.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace disac
