#include "vflow/random.hpp"

#include <cmath>

namespace vflow {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(root) ^ h);
}

Eigen::VectorXd sample_direction(Rng& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  double n = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
    n = v.norm();
  } while (n < 1e-12);
  return v / n;
}

Eigen::VectorXd sample_ball(Rng& rng, const Eigen::VectorXd& center, double radius) {
  const int dim = static_cast<int>(center.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius * std::pow(unit(rng), 1.0 / dim);
  return center + r * sample_direction(rng, dim);
}

}  // namespace vflow
