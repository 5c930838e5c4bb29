#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace icepred {

/// Independent named random streams derived from one seed.
class RandomStreams {
 public:
  explicit RandomStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64 stream(std::string_view name) const;

 private:
  std::uint64_t seed_;
};

Eigen::VectorXd standard_normal(std::mt19937_64& rng, Eigen::Index n);
Eigen::MatrixXd standard_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace icepred
