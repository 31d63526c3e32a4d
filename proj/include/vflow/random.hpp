#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace vflow {

using Rng = std::mt19937_64;

/// Derives a child seed from a root seed and a fixed label (FNV-1a over the
/// label, mixed with splitmix64). Streams for different labels are independent
/// of evaluation order, so concurrent runs stay reproducible.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

inline Rng make_rng(std::uint64_t root, std::string_view label) {
  return Rng(derive_seed(root, label));
}

/// Uniform sample from the closed ball of given radius around `center`.
Eigen::VectorXd sample_ball(Rng& rng, const Eigen::VectorXd& center, double radius);

/// Uniform direction on the unit sphere of R^dim.
Eigen::VectorXd sample_direction(Rng& rng, int dim);

}  // namespace vflow
