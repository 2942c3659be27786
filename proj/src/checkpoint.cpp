// SPDX-License-Identifier: Apache-2.0
#include "hca/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {
namespace {

constexpr const char* kMagic = "HCACKPT";

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void u64(std::uint64_t v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void i64(std::int64_t v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void f64(double v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int64_t i64() { return pod<std::int64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const auto n = bounded(u64());
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::vector<double> doubles() {
    const auto n = bounded(u64() * sizeof(double)) / sizeof(double);
    std::vector<double> v(n);
    raw(reinterpret_cast<char*>(v.data()), n * sizeof(double));
    return v;
  }

 private:
  template <typename T>
  T pod() {
    T v;
    raw(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  std::size_t bounded(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 34)) throw IoError("corrupt checkpoint (oversized field): " + source_);
    return static_cast<std::size_t>(n);
  }
  void raw(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw IoError("truncated checkpoint: " + source_);
  }

  std::istream& is_;
  std::string source_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint " + tmp.string());
    os << kMagic << ' ' << kCheckpointVersion << '\n';
    Writer w(os);
    w.str(format_config(ck.config));
    w.i64(ck.epoch);
    w.f64(ck.best_score);
    w.i64(ck.best_epoch);
    w.f64(ck.alpha);
    w.str(serialize_rng(ck.rng));
    w.f64(ck.optimizer.alpha_square_avg);
    w.u64(static_cast<std::uint64_t>(ck.parameters.count()));
    for (int i = 0; i < ck.parameters.count(); ++i) {
      const auto& p = ck.parameters[i];
      w.str(p.name);
      w.u64(p.shape.size());
      for (int d : p.shape) w.i64(d);
      w.doubles(p.value);
      w.doubles(static_cast<std::size_t>(i) < ck.optimizer.square_avg.size()
                    ? ck.optimizer.square_avg[static_cast<std::size_t>(i)]
                    : std::vector<double>(p.value.size(), 0.0));
    }
    w.str("END");
    os.flush();
    if (!os) throw IoError("short write to checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  std::string header;
  std::getline(is, header);
  const std::string expected = std::string(kMagic) + " " + kCheckpointVersion;
  if (header != expected) {
    std::string stored = "unrecognized header";
    if (header.rfind(std::string(kMagic) + " ", 0) == 0) stored = header.substr(std::strlen(kMagic) + 1);
    throw VersionError("checkpoint " + path.string() + ": stored version '" + stored +
                       "', expected '" + kCheckpointVersion + "'");
  }

  Reader r(is, path.string());
  Checkpoint ck;
  ck.config = parse_config(r.str());
  ck.epoch = static_cast<int>(r.i64());
  ck.best_score = r.f64();
  ck.best_epoch = static_cast<int>(r.i64());
  ck.alpha = r.f64();
  ck.rng = deserialize_rng(r.str());
  ck.optimizer.alpha_square_avg = r.f64();
  const auto count = r.u64();
  if (count > 100000) throw IoError("corrupt checkpoint (parameter count): " + path.string());
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto ndim = r.u64();
    if (ndim > 8) throw IoError("corrupt checkpoint (rank): " + path.string());
    std::vector<int> shape;
    for (std::uint64_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.i64()));
    auto value = r.doubles();
    auto square = r.doubles();
    if (square.size() != value.size()) throw IoError("corrupt checkpoint (optimizer state): " + path.string());
    try {
      ck.parameters.add(std::move(name), std::move(shape), std::move(value));
    } catch (const ConfigError& e) {
      throw IoError("corrupt checkpoint: " + std::string(e.what()));
    }
    ck.optimizer.square_avg.push_back(std::move(square));
  }
  if (r.str() != "END") throw IoError("corrupt checkpoint trailer: " + path.string());
  return ck;
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  Model model = build_model(checkpoint.config.model);
  auto& params = model.parameters();
  if (params.count() != checkpoint.parameters.count()) {
    throw IoError("checkpoint has " + std::to_string(checkpoint.parameters.count()) +
                  " parameter tensors, model expects " + std::to_string(params.count()));
  }
  for (int i = 0; i < params.count(); ++i) {
    const auto& src = checkpoint.parameters[i];
    auto& dst = params[i];
    if (src.name != dst.name || src.shape != dst.shape) {
      throw IoError("checkpoint parameter '" + src.name + "' does not match model parameter '" +
                    dst.name + "'");
    }
    dst.value = src.value;
  }
  return model;
}

}  // namespace hca
