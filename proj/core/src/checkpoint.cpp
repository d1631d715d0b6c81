#include "rsinet/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace rsinet {

namespace {

static_assert(sizeof(double) == 8, "checkpoint format requires 64-bit doubles");

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  write_u64(os, v.size());
  for (double x : v) write_f64(os, x);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  require(is.good(), "checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  require(is.good(), "checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  const std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string read_string(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  require(is.good(), "checkpoint: truncated file");
  return s;
}

std::vector<double> read_doubles(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  std::vector<double> v(n);
  for (std::uint64_t i = 0; i < n; ++i) v[i] = read_f64(is);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "checkpoint: cannot write " + path);
  os.write(kCheckpointMagic, 4);
  write_u32(os, cp.version);
  write_string(os, cp.config_json);

  write_u64(os, cp.tensors.size());
  for (const auto& [name, t] : cp.tensors) {
    write_string(os, name);
    write_u32(os, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) write_u64(os, d);
    write_doubles(os, t.values());
  }

  write_f64(os, cp.adam.lr);
  write_f64(os, cp.adam.beta1);
  write_f64(os, cp.adam.beta2);
  write_f64(os, cp.adam.eps);
  write_u64(os, cp.adam.step_count);
  write_u64(os, cp.adam.first_moment.size());
  for (const auto& m : cp.adam.first_moment) write_doubles(os, m);
  for (const auto& m : cp.adam.second_moment) write_doubles(os, m);

  write_u64(os, cp.iteration);
  write_string(os, cp.rng_state);
  require(os.good(), "checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, kCheckpointMagic, 4) == 0,
          "checkpoint: bad magic bytes in " + path);
  Checkpoint cp;
  cp.version = read_u32(is);
  require(cp.version == kCheckpointVersion,
          "checkpoint: unsupported format version");
  cp.config_json = read_string(is);

  const std::uint64_t n_tensors = read_u64(is);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const std::string name = read_string(is);
    const std::uint32_t ndim = read_u32(is);
    Shape shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = read_u64(is);
    std::vector<double> data = read_doubles(is);
    cp.tensors.emplace_back(name,
                            Tensor::from_data(shape, std::move(data)));
  }

  cp.adam.lr = read_f64(is);
  cp.adam.beta1 = read_f64(is);
  cp.adam.beta2 = read_f64(is);
  cp.adam.eps = read_f64(is);
  cp.adam.step_count = read_u64(is);
  const std::uint64_t n_moments = read_u64(is);
  for (std::uint64_t i = 0; i < n_moments; ++i)
    cp.adam.first_moment.push_back(read_doubles(is));
  for (std::uint64_t i = 0; i < n_moments; ++i)
    cp.adam.second_moment.push_back(read_doubles(is));

  cp.iteration = read_u64(is);
  cp.rng_state = read_string(is);
  return cp;
}

Checkpoint snapshot(const ParamRegistry& params, const std::string& config_json,
                    const AdamState& adam, std::uint64_t iteration,
                    const std::string& rng_state) {
  Checkpoint cp;
  cp.config_json = config_json;
  for (const auto& [name, t] : params.entries())
    cp.tensors.emplace_back(name, t.clone_detached());
  cp.adam = adam;
  cp.iteration = iteration;
  cp.rng_state = rng_state;
  return cp;
}

void restore_params(ParamRegistry& params, const Checkpoint& cp) {
  require(params.entries().size() == cp.tensors.size(),
          "checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < cp.tensors.size(); ++i) {
    const auto& [name, src] = cp.tensors[i];
    Tensor dst = params.entries()[i].second;
    require(params.entries()[i].first == name,
            "checkpoint: parameter name mismatch at " + name);
    require(dst.shape() == src.shape(),
            "checkpoint: shape mismatch for " + name);
    dst.values() = src.values();
  }
}

}  // namespace rsinet
