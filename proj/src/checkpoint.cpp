#include "proxgap/checkpoint.hpp"

#include "proxgap/error.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>
#include <sstream>

namespace proxgap {

namespace {

constexpr char kMagic[4] = {'P', 'X', 'G', 'C'};

class Writer {
public:
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (double x : v) f64(x);
  }
  void raw(const std::string& s) { bytes_ += s; }
  const std::string& bytes() const { return bytes_; }

private:
  std::string bytes_;
};

class Reader {
public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t unsigned_bytes(int n) {
    require(pos_ + static_cast<std::size_t>(n) <= bytes_.size(), "checkpoint: truncated file");
    std::uint64_t x = 0;
    for (int i = 0; i < n; ++i)
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return x;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(unsigned_bytes(4)); }
  std::uint64_t u64() { return unsigned_bytes(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::VectorXd vec() {
    const std::uint64_t n = u64();
    require(n <= (bytes_.size() - pos_) / 8, "checkpoint: vector length exceeds file");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = f64();
    return v;
  }
  std::string raw(std::size_t n) {
    require(pos_ + n <= bytes_.size(), "checkpoint: truncated file");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

void write_adam(Writer& w, const AdamState<double>& s) {
  w.u64(s.t);
  w.f64(s.lr);
  w.f64(s.beta1);
  w.f64(s.beta2);
  w.f64(s.eps);
  require(s.m.size() == s.v.size(), "checkpoint: Adam moment lengths differ");
  w.u64(static_cast<std::uint64_t>(s.m.size()));
  for (double x : s.m) w.f64(x);
  for (double x : s.v) w.f64(x);
}

AdamState<double> read_adam(Reader& r) {
  AdamState<double> s;
  s.t = r.u64();
  s.lr = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.eps = r.f64();
  const auto n = static_cast<Eigen::Index>(r.u64());
  s.m.resize(n);
  s.v.resize(n);
  for (auto& x : s.m) x = r.f64();
  for (auto& x : s.v) x = r.f64();
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "checkpoint: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "checkpoint: cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), "checkpoint: write failed for '" + path + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainingState& state,
                     const ExperimentConfig& cfg) {
  Writer w;
  w.raw(std::string(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u64(static_cast<std::uint64_t>(state.step));
  w.u64(state.rng.seed());
  w.vec(state.gan.theta_d.values());
  w.vec(state.gan.theta_g.values());
  write_adam(w, state.d_opt);
  write_adam(w, state.g_opt);
  const std::string rng_state = state.rng.serialize();
  w.u64(rng_state.size());
  w.raw(rng_state);
  write_file(path, w.bytes());

  nlohmann::ordered_json side;
  side["format"] = "PXGC";
  side["version"] = kCheckpointVersion;
  side["step"] = state.step;
  side["seed"] = cfg.seed;
  side["rng_seed"] = state.rng.seed();
  side["objective"] = objective_name(state.gan.objective);
  side["discriminator"] = {{"architecture", state.gan.d_spec.describe()},
                           {"parameters", state.gan.theta_d.size()}};
  side["generator"] = {{"architecture", state.gan.g_spec.describe()},
                       {"parameters", state.gan.theta_g.size()}};
  side["adam_steps"] = {{"discriminator", state.d_opt.t}, {"generator", state.g_opt.t}};
  side["config"] = config_entries(cfg);
  write_file(path + ".json", side.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& path, const ExperimentConfig* override_cfg) {
  const auto side = nlohmann::json::parse(read_file(path + ".json"));
  require(side.value("format", "") == "PXGC", "checkpoint: sidecar has the wrong format tag");

  LoadedCheckpoint out;
  if (override_cfg) {
    out.config = *override_cfg;
  } else {
    std::string doc;
    for (const auto& [k, v] : side.at("config").items()) doc += k + " = " + v.get<std::string>() + "\n";
    out.config = parse_config(doc);
  }

  Reader r(read_file(path));
  require(r.raw(4) == std::string(kMagic, 4), "checkpoint: bad magic in '" + path + "'");
  const std::uint32_t version = r.u32();
  require(version == kCheckpointVersion,
          "checkpoint: unsupported version " + std::to_string(version));
  auto& st = out.state;
  st.step = static_cast<int>(r.u64());
  const std::uint64_t seed = r.u64();
  st.gan.d_spec = out.config.d_spec();
  st.gan.g_spec = out.config.g_spec();
  st.gan.objective = out.config.objective_kind();
  st.gan.theta_d = ParamVector(st.gan.d_spec, r.vec());
  st.gan.theta_g = ParamVector(st.gan.g_spec, r.vec());
  st.d_opt = read_adam(r);
  st.g_opt = read_adam(r);
  const auto rng_len = r.u64();
  st.rng = Rng::deserialize(seed, r.raw(static_cast<std::size_t>(rng_len)));
  require(r.done(), "checkpoint: trailing bytes in '" + path + "'");
  st.gan.validate();
  return out;
}

}  // namespace proxgap
