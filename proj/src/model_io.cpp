#include "deepar/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "deepar/error.hpp"

namespace deepar {
namespace {

constexpr std::array<char, 8> kMagic = {'D', 'E', 'E', 'P', 'A', 'R', 'M', 'D'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(bytes, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(bytes, 4);
}

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw DataError("model file is truncated");
    }
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
      v = (v << 8) | b[i];
    }
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | b[i];
    }
    return v;
  }
  std::uint8_t u8() {
    char c;
    bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t count(std::uint64_t limit = 1ULL << 32) {
    const std::uint64_t v = u64();
    if (v > limit) {
      throw DataError("model file has an implausible dimension " + std::to_string(v));
    }
    return static_cast<std::size_t>(v);
  }

 private:
  std::istream& in_;
};

std::uint8_t granularity_byte(Granularity g) {
  switch (g) {
    case Granularity::Hourly: return 0;
    case Granularity::Daily: return 1;
    case Granularity::Weekly: return 2;
    case Granularity::Monthly: return 3;
  }
  return 0;
}

}  // namespace

void write_model(std::ostream& out, const ModelParams& params) {
  const auto& a = params.arch;
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kModelFormatVersion);
  put_u8(out, static_cast<std::uint8_t>(a.likelihood));
  put_u8(out, granularity_byte(a.granularity));
  put_u8(out, a.use_scaling ? 1 : 0);
  put_u8(out, 0);
  for (std::size_t v : {a.window.conditioning_length, a.window.prediction_length, a.covariate_dim,
                        a.num_categories, a.embedding_dim, a.hidden_units, a.num_layers}) {
    put_u64(out, v);
  }
  for (double v : params.standardizer.mean) {
    put_f64(out, v);
  }
  for (double v : params.standardizer.stddev) {
    put_f64(out, v);
  }
  auto& mutable_params = const_cast<ModelParams&>(params);
  const auto blocks = mutable_params.blocks();
  put_u32(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u64(out, b.value->rows());
    put_u64(out, b.value->cols());
    for (double v : b.value->values()) {
      put_f64(out, v);
    }
  }
  if (!out) {
    throw DataError("failed to write model");
  }
}

ModelParams read_model(std::istream& in) {
  Reader r(in);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) {
    throw DataError("not a model file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  ModelArchitecture a;
  const std::uint8_t kind = r.u8();
  if (kind > 1) {
    throw DataError("model file has unknown likelihood code " + std::to_string(kind));
  }
  a.likelihood = static_cast<LikelihoodKind>(kind);
  const std::uint8_t gran = r.u8();
  static constexpr Granularity kGranularities[] = {Granularity::Hourly, Granularity::Daily,
                                                   Granularity::Weekly, Granularity::Monthly};
  if (gran > 3) {
    throw DataError("model file has unknown granularity code " + std::to_string(gran));
  }
  a.granularity = kGranularities[gran];
  a.use_scaling = r.u8() != 0;
  r.u8();
  a.window.conditioning_length = r.count();
  a.window.prediction_length = r.count();
  a.covariate_dim = r.count(1024);
  a.num_categories = r.count();
  a.embedding_dim = r.count(1 << 16);
  a.hidden_units = r.count(1 << 16);
  a.num_layers = r.count(1024);

  ModelParams p;
  p.arch = a;
  p.standardizer.mean.resize(a.covariate_dim);
  p.standardizer.stddev.resize(a.covariate_dim);
  for (double& v : p.standardizer.mean) {
    v = r.f64();
  }
  for (double& v : p.standardizer.stddev) {
    v = r.f64();
  }
  p.embedding = Matrix(a.num_categories, a.embedding_dim);
  std::size_t input = a.input_dim();
  for (std::size_t l = 0; l < a.num_layers; ++l) {
    p.layers.emplace_back(input, a.hidden_units);
    input = a.hidden_units;
  }
  p.head = HeadParams(a.hidden_units);

  auto blocks = p.blocks();
  const std::uint32_t n_blocks = r.u32();
  if (n_blocks != blocks.size()) {
    throw DataError("model file has " + std::to_string(n_blocks) + " arrays, expected " +
                    std::to_string(blocks.size()));
  }
  for (auto& b : blocks) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 256) {
      throw DataError("model file has an implausible array name length");
    }
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const std::size_t rows = r.count();
    const std::size_t cols = r.count();
    if (name != b.name || rows != b.value->rows() || cols != b.value->cols()) {
      throw DataError("model array '" + name + "' (" + std::to_string(rows) + "x" +
                      std::to_string(cols) + ") does not match expected '" + b.name + "'");
    }
    for (double& v : b.value->values()) {
      v = r.f64();
    }
  }
  return p;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw DataError("cannot write " + tmp.string());
    }
    write_model(out, params);
  }
  std::filesystem::rename(tmp, path);
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open model file " + path.string());
  }
  return read_model(in);
}

}  // namespace deepar
