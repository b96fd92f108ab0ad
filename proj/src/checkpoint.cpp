#include "merge_arena/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace merge_arena {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'M', 'R', 'G', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void put_doubles(std::span<const double> values) {
    put<std::uint64_t>(values.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes.insert(bytes.end(), p, p + values.size_bytes());
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    need(sizeof(T));
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw CheckpointError("corrupt array length");
    std::vector<double> out(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_net(Writer& w, const Mlp& net) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.dims().size()));
  for (int d : net.dims()) w.put<std::int32_t>(d);
  w.put<std::uint8_t>(net.head() == Mlp::Head::tanh ? 1 : 0);
  w.put_doubles(net.flatten());
}

Mlp get_net(Reader& r) {
  const auto layers = r.get<std::uint32_t>();
  if (layers < 2 || layers > 16) throw CheckpointError("corrupt layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < layers; ++i) {
    const auto d = r.get<std::int32_t>();
    if (d <= 0 || d > 4096) throw CheckpointError("corrupt layer width");
    dims.push_back(d);
  }
  const auto head = r.get<std::uint8_t>() ? Mlp::Head::tanh : Mlp::Head::linear;
  Mlp net(dims, head);
  const auto params = r.get_doubles();
  if (params.size() != net.parameter_count()) throw CheckpointError("parameter count mismatch");
  net.assign(params);
  return net;
}

std::vector<double> flatten_grad(const Mlp& shape, const Mlp::Grad& g) {
  Mlp tmp = shape;
  tmp.weights = g.weights;
  tmp.biases = g.biases;
  return tmp.flatten();
}

Mlp::Grad unflatten_grad(const Mlp& shape, std::span<const double> flat) {
  Mlp tmp = shape;
  tmp.assign(flat);
  return {tmp.weights, tmp.biases};
}

void put_adam(Writer& w, const Mlp& net, const Adam& opt) {
  w.put<std::int64_t>(opt.t);
  w.put_doubles(flatten_grad(net, opt.m));
  w.put_doubles(flatten_grad(net, opt.v));
}

Adam get_adam(Reader& r, const Mlp& net) {
  Adam opt;
  opt.t = r.get<std::int64_t>();
  const auto m = r.get_doubles();
  const auto v = r.get_doubles();
  if (m.size() != net.parameter_count() || v.size() != net.parameter_count()) {
    throw CheckpointError("optimizer state size mismatch");
  }
  opt.m = unflatten_grad(net, m);
  opt.v = unflatten_grad(net, v);
  return opt;
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint8_t> encode_checkpoint(const DdpgLearner& learner, const CheckpointMeta& meta) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(meta.variant));
  w.put_string(meta.learner);
  w.put<std::int64_t>(meta.episode);
  w.put<std::uint32_t>(meta.config_hash);
  w.put<std::uint64_t>(meta.seed);
  w.put<std::int32_t>(learner.obs_dim());

  const auto& h = learner.hyper;
  w.put(h.lr_actor);
  w.put(h.lr_critic);
  w.put(h.gamma);
  w.put<std::int32_t>(h.batch);
  w.put<std::int32_t>(h.capacity);
  w.put(h.tau);
  w.put(h.noise_sigma0);
  w.put(h.noise_decay);

  put_net(w, learner.actor);
  put_net(w, learner.critic);
  put_net(w, learner.target_actor);
  put_net(w, learner.target_critic);
  put_adam(w, learner.actor, learner.actor_opt);
  put_adam(w, learner.critic, learner.critic_opt);
  w.put<std::int64_t>(learner.noise_step);
  w.put<std::int64_t>(learner.update_count);
  std::ostringstream rng_state;
  rng_state << learner.rng;
  w.put_string(rng_state.str());

  w.put<std::uint32_t>(crc32_of(w.bytes));
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             std::optional<int> expected_obs_dim) {
  if (bytes.size() < sizeof(kMagic) + 8) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (crc32_of(bytes.first(bytes.size() - 4)) != stored_crc) {
    throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated file)");
  }

  Reader r(bytes.first(bytes.size() - 4));
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<char>();
  Checkpoint ck;
  ck.meta.version = r.get<std::uint32_t>();
  if (ck.meta.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.meta.version));
  }
  const auto variant = r.get<std::uint8_t>();
  if (variant > 1) throw CheckpointError("corrupt variant tag");
  ck.meta.variant = static_cast<Variant>(variant);
  ck.meta.learner = r.get_string();
  ck.meta.episode = r.get<std::int64_t>();
  ck.meta.config_hash = r.get<std::uint32_t>();
  ck.meta.seed = r.get<std::uint64_t>();
  const int obs_dim = r.get<std::int32_t>();
  if (expected_obs_dim && obs_dim != *expected_obs_dim) {
    throw CheckpointError("checkpoint has " + std::to_string(obs_dim) +
                          " inputs, expected " + std::to_string(*expected_obs_dim));
  }

  DdpgHyper h;
  h.lr_actor = r.get<double>();
  h.lr_critic = r.get<double>();
  h.gamma = r.get<double>();
  h.batch = r.get<std::int32_t>();
  h.capacity = r.get<std::int32_t>();
  h.tau = r.get<double>();
  h.noise_sigma0 = r.get<double>();
  h.noise_decay = r.get<double>();
  try {
    h.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("corrupt hyperparameters: ") + e.what());
  }

  DdpgLearner learner(obs_dim, h, 0);
  learner.actor = get_net(r);
  learner.critic = get_net(r);
  learner.target_actor = get_net(r);
  learner.target_critic = get_net(r);
  if (learner.actor.input_dim() != obs_dim || learner.critic.input_dim() != obs_dim + 1 ||
      learner.target_actor.dims() != learner.actor.dims() ||
      learner.target_critic.dims() != learner.critic.dims()) {
    throw CheckpointError("network shapes do not match the recorded input dimension");
  }
  learner.actor_opt = get_adam(r, learner.actor);
  learner.critic_opt = get_adam(r, learner.critic);
  learner.noise_step = r.get<std::int64_t>();
  learner.update_count = r.get<std::int64_t>();
  std::istringstream rng_state(r.get_string());
  rng_state >> learner.rng;
  if (!rng_state) throw CheckpointError("corrupt rng state");
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  ck.learner = std::move(learner);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const DdpgLearner& learner,
                     const CheckpointMeta& meta) {
  const auto bytes = encode_checkpoint(learner, meta);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move " + tmp.string() + " into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_obs_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes, expected_obs_dim);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace merge_arena
