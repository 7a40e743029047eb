#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mbpg {

/// Flat policy parameter vector.
using ParamVector = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Every random draw in the library goes through this engine so that a seed
/// fully determines a run on a given build.
using Rng = std::mt19937_64;

/// Derive an independent engine for sub-stream `stream` of `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter vector dimension does not match the policy architecture.
class ParameterShapeError : public Error {
 public:
  using Error::Error;
};

/// Action id or value outside the policy's action space.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration would exceed the configured trajectory cap.
class EnumerationTooLarge : public Error {
 public:
  using Error::Error;
};

/// Oracle-only routine called on a problem that is too large for it.
class OracleScopeError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration / model description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// --help was requested; the message carries the usage text.
class HelpRequested : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A training run hit a non-finite update or diverged.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace mbpg
