#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "deepar/dataset.hpp"
#include "deepar/likelihood.hpp"

namespace deepar {

struct TrainConfig {
  LikelihoodKind likelihood = LikelihoodKind::NegativeBinomial;
  WindowSpec window{8, 8};
  std::size_t num_layers = 3;
  std::size_t hidden_units = 40;
  std::size_t embedding_dim = 8;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t max_batches = 2000;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  std::size_t windows_per_epoch = 3200;
  bool uniform_sampling = false;
  bool no_scaling = false;
  double grad_clip = 10.0;
  double validation_fraction = 0.1;
  std::size_t max_validation_windows = 256;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Flat "key = value" text, '#' starts a comment. Unknown keys, duplicate keys
// and malformed values are ConfigErrors naming the line.
TrainConfig parse_config(std::istream& in, const std::string& source = "<config>");
TrainConfig load_config(const std::filesystem::path& path);
// Sets one key; used by the parser and for command-line overrides.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
// Every key, one per line, in a fixed order; parse_config(to_text(c)) == c.
std::string to_text(const TrainConfig& config);

}  // namespace deepar
