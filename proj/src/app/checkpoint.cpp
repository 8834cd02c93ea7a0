#include "dghif/app/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "dghif/common/errors.hpp"

namespace dghif::app {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "DGHIFCKP";

class Writer {
 public:
  template <typename T>
  void raw(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void u64(std::uint64_t v) { raw(v); }
  void f64(double v) { raw(v); }
  void flag(bool v) { raw(static_cast<std::uint8_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void opt(const std::optional<double>& v) {
    flag(v.has_value());
    if (v) f64(*v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  double f64() { return raw<double>(); }
  bool flag() {
    auto b = raw<std::uint8_t>();
    if (b > 1) throw DataError("checkpoint: corrupt boolean field");
    return b == 1;
  }
  std::size_t count(std::size_t elem_size) {
    std::uint64_t n = u64();
    if (elem_size > 0 && n > (in_.size() - pos_) / elem_size) throw DataError("checkpoint: truncated data");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    std::size_t n = count(1);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    std::vector<double> v(count(sizeof(double)));
    for (double& x : v) x = f64();
    return v;
  }
  std::optional<double> opt() {
    if (!flag()) return std::nullopt;
    return f64();
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint: truncated data");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

train::Stage stage_from_index(std::uint64_t i) {
  if (i > static_cast<std::uint64_t>(train::Stage::Joint)) throw DataError("checkpoint: unknown stage id");
  return static_cast<train::Stage>(i);
}

}  // namespace

Checkpoint capture(const ExperimentConfig& config, std::uint64_t seed, const train::Model& model,
                   const train::Trainer& trainer) {
  Checkpoint c;
  c.config_hash = config_hash(config);
  c.config_text = serialize_config(config);
  c.seed = seed;
  c.trainer = trainer.state();
  const auto& stages = trainer.plan().stages;
  c.stage = c.trainer.finished || c.trainer.stage_index >= stages.size()
                ? "done"
                : std::string(train::to_string(stages[c.trainer.stage_index].stage));
  for (const auto& p : model.parameters()) {
    auto values = p.tensor.values();
    c.tensors.push_back({p.name, p.group, p.tensor.shape(), std::vector<double>(values.begin(), values.end())});
  }
  c.moments = trainer.optimizer().state();
  if (c.moments.size() != c.tensors.size()) throw StateError("optimizer and model parameter lists differ");
  return c;
}

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  for (char ch : kMagic) w.raw(ch);
  w.raw(c.version);
  w.u64(c.config_hash);
  w.str(c.config_text);
  w.u64(c.seed);
  w.str(c.stage);

  w.u64(c.tensors.size());
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.str(t.group);
    w.u64(t.shape.size());
    for (auto d : t.shape) w.u64(d);
    w.doubles(t.values);
  }
  w.u64(c.moments.size());
  for (const auto& m : c.moments) {
    w.doubles(m.m);
    w.doubles(m.v);
    w.u64(m.step);
  }

  const auto& s = c.trainer;
  w.u64(s.stage_index);
  w.u64(s.stage_epoch);
  w.u64(s.stage_step);
  w.u64(s.epoch);
  w.f64(s.best_f1);
  w.u64(s.best_epoch);
  w.u64(s.since_best);
  w.flag(s.finished);
  w.str(s.rng);
  w.u64(s.history.size());
  for (const auto& h : s.history) {
    w.u64(h.epoch);
    w.u64(static_cast<std::uint64_t>(h.stage));
    w.f64(h.train_loss);
    for (const auto* o : {&h.val_f1, &h.val_precision, &h.val_recall, &h.metaphor_acc, &h.lambda_eff, &h.mean_gate}) {
      w.opt(*o);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  std::string magic;
  for (std::size_t i = 0; i < kMagic.size(); ++i) magic.push_back(r.raw<char>());
  if (magic != kMagic) throw DataError("not a checkpoint file (bad magic)");
  Checkpoint c;
  c.version = r.raw<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw DataError(fmt::format("checkpoint version {} is not supported (expected {})", c.version, kCheckpointVersion));
  }
  c.config_hash = r.u64();
  c.config_text = r.str();
  c.seed = r.u64();
  c.stage = r.str();

  c.tensors.resize(r.count(1));
  for (auto& t : c.tensors) {
    t.name = r.str();
    t.group = r.str();
    t.shape.resize(r.count(sizeof(std::uint64_t)));
    for (auto& d : t.shape) d = r.u64();
    t.values = r.doubles();
    if (t.values.size() != tc::numel(t.shape)) {
      throw DataError(fmt::format("checkpoint tensor {} has {} values for shape {}", t.name, t.values.size(),
                                  tc::to_string(t.shape)));
    }
  }
  c.moments.resize(r.count(1));
  for (auto& m : c.moments) {
    m.m = r.doubles();
    m.v = r.doubles();
    m.step = r.u64();
  }
  if (c.moments.size() != c.tensors.size()) throw DataError("checkpoint moment and tensor counts differ");

  auto& s = c.trainer;
  s.stage_index = r.u64();
  s.stage_epoch = r.u64();
  s.stage_step = r.u64();
  s.epoch = r.u64();
  s.best_f1 = r.f64();
  s.best_epoch = r.u64();
  s.since_best = r.u64();
  s.finished = r.flag();
  s.rng = r.str();
  s.history.resize(r.count(1));
  for (auto& h : s.history) {
    h.epoch = r.u64();
    h.stage = stage_from_index(r.u64());
    h.train_loss = r.f64();
    for (auto* o : {&h.val_f1, &h.val_precision, &h.val_recall, &h.metaphor_acc, &h.lambda_eff, &h.mean_gate}) {
      *o = r.opt();
    }
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = encode_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write checkpoint {}", tmp.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(fmt::format("failed writing checkpoint {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open checkpoint {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return decode_checkpoint(buf.str());
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void restore_parameters(const Checkpoint& ckpt, const tc::ParamList& params) {
  if (params.size() != ckpt.tensors.size()) {
    throw DataError(
        fmt::format("checkpoint holds {} tensors but the model has {}", ckpt.tensors.size(), params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = ckpt.tensors[i];
    const auto& p = params[i];
    if (stored.name != p.name || stored.group != p.group) {
      throw DataError(fmt::format("checkpoint tensor {} does not match model parameter {}", stored.name, p.name));
    }
    if (stored.shape != p.tensor.shape()) {
      throw DataError(fmt::format("parameter {}: checkpoint shape {} but model shape {}", p.name,
                                  tc::to_string(stored.shape), tc::to_string(p.tensor.shape())));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    tc::Tensor handle = params[i].tensor;  // shares storage with the parameter
    auto values = handle.mutable_values();
    std::copy(ckpt.tensors[i].values.begin(), ckpt.tensors[i].values.end(), values.begin());
  }
}

void check_config(const Checkpoint& ckpt, const ExperimentConfig& config, bool force) {
  const auto hash = config_hash(config);
  if (hash != ckpt.config_hash && !force) {
    throw ConfigError(fmt::format("config hash {:016x} differs from the checkpoint's {:016x} (use --force to override)",
                                  hash, ckpt.config_hash));
  }
}

}  // namespace dghif::app
