#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deepar {

// Deterministic generator built on mt19937_64, whose output sequence is fixed
// by the standard. All derived distributions are implemented here so samples
// do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream for (seed, name, index); used for per-path and
  // per-purpose substreams so changing one consumer never shifts another.
  static Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on the open interval (0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Gamma(shape, scale), mean shape * scale.
  double gamma(double shape, double scale);
  std::uint64_t poisson(double lambda);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace deepar
