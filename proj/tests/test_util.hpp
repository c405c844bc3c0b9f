// Shared helpers for the test suites: seeded samplers and temp-file paths.
#pragma once

#include "storyq/common.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace testutil {

// Upvote-like heavy-tailed sampler: z ~ Pareto(alpha, x_m=1) by inverse CDF,
// returned as z - 1 so the fitters' +1 shift recovers alpha.
inline std::vector<double> sample_pareto_upvotes(double alpha, size_t n, uint64_t seed) {
  storyq::Rng rng(seed);
  std::vector<double> out(n);
  for (double& x : out) {
    double u = rng.uniform();
    x = std::pow(1.0 - u, -1.0 / alpha) - 1.0;
  }
  return out;
}

inline std::vector<double> sample_gaussian(double mean, double sd, size_t n, storyq::Rng& rng) {
  std::vector<double> out(n);
  for (double& x : out) x = rng.normal(mean, sd);
  return out;
}

inline std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("storyq_test_" + name)).string();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil
