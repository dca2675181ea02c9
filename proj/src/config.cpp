#include "deepar/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "deepar/error.hpp"

namespace deepar {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" +
                      std::string(value) + "'");
  }
  return v;
}

double parse_real(std::string_view key, std::string_view value) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v)) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(value) +
                      "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("'" + std::string(key) + "' expects true or false, got '" +
                    std::string(value) + "'");
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void TrainConfig::validate() const {
  window.validate();
  if (num_layers < 1 || hidden_units < 1 || batch_size < 1 || max_batches < 1 ||
      windows_per_epoch < 1 || patience < 1 || max_validation_windows < 1) {
    throw ConfigError(
        "num_layers, hidden_units, batch_size, max_batches, windows_per_epoch, patience and "
        "max_validation_windows must be positive");
  }
  if (!(learning_rate > 0.0) || !(grad_clip > 0.0)) {
    throw ConfigError("learning_rate and grad_clip must be positive");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

void set_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
  if (key == "likelihood") c.likelihood = parse_likelihood(value);
  else if (key == "conditioning_length") c.window.conditioning_length = parse_count(key, value);
  else if (key == "prediction_length") c.window.prediction_length = parse_count(key, value);
  else if (key == "num_layers") c.num_layers = parse_count(key, value);
  else if (key == "hidden_units") c.hidden_units = parse_count(key, value);
  else if (key == "embedding_dim") c.embedding_dim = parse_count(key, value);
  else if (key == "batch_size") c.batch_size = parse_count(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_real(key, value);
  else if (key == "max_batches") c.max_batches = parse_count(key, value);
  else if (key == "patience") c.patience = parse_count(key, value);
  else if (key == "seed") c.seed = parse_count(key, value);
  else if (key == "windows_per_epoch") c.windows_per_epoch = parse_count(key, value);
  else if (key == "uniform_sampling") c.uniform_sampling = parse_bool(key, value);
  else if (key == "no_scaling") c.no_scaling = parse_bool(key, value);
  else if (key == "grad_clip") c.grad_clip = parse_real(key, value);
  else if (key == "validation_fraction") c.validation_fraction = parse_real(key, value);
  else if (key == "max_validation_windows") c.max_validation_windows = parse_count(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::istream& in, const std::string& source) {
  TrainConfig config;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) {
      continue;
    }
    const auto eq = view.find('=');
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) {
      throw ConfigError(where + "expected 'key = value'");
    }
    const auto key = trim(view.substr(0, eq));
    const auto value = trim(view.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
    }
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  return parse_config(in, path.string());
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "likelihood = " << to_string(c.likelihood) << '\n'
      << "conditioning_length = " << c.window.conditioning_length << '\n'
      << "prediction_length = " << c.window.prediction_length << '\n'
      << "num_layers = " << c.num_layers << '\n'
      << "hidden_units = " << c.hidden_units << '\n'
      << "embedding_dim = " << c.embedding_dim << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "learning_rate = " << format_real(c.learning_rate) << '\n'
      << "max_batches = " << c.max_batches << '\n'
      << "patience = " << c.patience << '\n'
      << "seed = " << c.seed << '\n'
      << "windows_per_epoch = " << c.windows_per_epoch << '\n'
      << "uniform_sampling = " << (c.uniform_sampling ? "true" : "false") << '\n'
      << "no_scaling = " << (c.no_scaling ? "true" : "false") << '\n'
      << "grad_clip = " << format_real(c.grad_clip) << '\n'
      << "validation_fraction = " << format_real(c.validation_fraction) << '\n'
      << "max_validation_windows = " << c.max_validation_windows << '\n';
  return out.str();
}

}  // namespace deepar
