#include "dghif/app/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include <fmt/format.h>

#include "dghif/common/errors.hpp"

namespace dghif::app {

namespace {

struct Field {
  std::string key;
  std::function<std::string()> get;
  std::function<void(std::string_view)> set;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError(fmt::format("config key '{}': '{}' is not {}", key, value, expected));
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  std::string s(v);
  try {
    std::size_t used = 0;
    double out = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return out;
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (true) {
    auto comma = v.find(',');
    out.push_back(trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, std::string>> names;

  std::string get(E e) const {
    for (const auto& [value, name] : names) {
      if (value == e) return name;
    }
    return "?";
  }
  E parse(std::string_view key, std::string_view v) const {
    std::string expected;
    for (const auto& [value, name] : names) {
      if (name == v) return value;
      expected += expected.empty() ? name : " | " + name;
    }
    bad_value(key, v, "one of " + expected);
  }
};

const EnumNames<graph::NormMode> kNormNames{{{graph::NormMode::Adaptive, "adaptive"},
                                             {graph::NormMode::FixedSqrt, "fixed_sqrt"}}};
const EnumNames<fusion::FusionMode> kFusionNames{{{fusion::FusionMode::Gated, "gated"},
                                                  {fusion::FusionMode::Concat, "concat"},
                                                  {fusion::FusionMode::TextOnly, "text_only"},
                                                  {fusion::FusionMode::GraphOnly, "graph_only"}}};
const EnumNames<train::LambdaMode> kLambdaNames{{{train::LambdaMode::Fixed, "fixed"},
                                                 {train::LambdaMode::Cosine, "cosine"},
                                                 {train::LambdaMode::Learned, "learned"}}};

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed fields share the size_t parser");

class Registry {
 public:
  explicit Registry(std::string section) : section_(std::move(section)) {}

  std::vector<Field> fields;

  void section(std::string name) { section_ = std::move(name); }

  void add(const std::string& name, std::size_t& f) {
    push(name, [&f] { return std::to_string(f); },
         [&f](std::string_view k, std::string_view v) { f = static_cast<std::size_t>(parse_u64(k, v)); });
  }
  void add(const std::string& name, int& f) {
    push(name, [&f] { return std::to_string(f); },
         [&f](std::string_view k, std::string_view v) { f = static_cast<int>(parse_u64(k, v)); });
  }
  void add(const std::string& name, double& f) {
    push(name, [&f] { return fmt_double(f); }, [&f](std::string_view k, std::string_view v) { f = parse_double(k, v); });
  }
  void add(const std::string& name, bool& f) {
    push(name, [&f] { return std::string(f ? "true" : "false"); },
         [&f](std::string_view k, std::string_view v) { f = parse_bool(k, v); });
  }
  void add(const std::string& name, std::string& f) {
    push(name, [&f] { return f; }, [&f](std::string_view, std::string_view v) { f = std::string(v); });
  }
  template <std::size_t N>
  void add(const std::string& name, std::array<double, N>& f) {
    push(name,
         [&f] {
           std::string s;
           for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + fmt_double(f[i]);
           return s;
         },
         [&f](std::string_view k, std::string_view v) {
           auto parts = split_list(v);
           if (parts.size() != N) bad_value(k, v, fmt::format("a list of {} numbers", N));
           for (std::size_t i = 0; i < N; ++i) f[i] = parse_double(k, parts[i]);
         });
  }
  void add(const std::string& name, std::vector<std::uint64_t>& f) {
    push(name,
         [&f] {
           std::string s;
           for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + std::to_string(f[i]);
           return s;
         },
         [&f](std::string_view k, std::string_view v) {
           std::vector<std::uint64_t> out;
           for (auto part : split_list(v)) out.push_back(parse_u64(k, part));
           f = std::move(out);
         });
  }
  template <typename E>
  void add_enum(const std::string& name, E& f, const EnumNames<E>& names) {
    push(name, [&f, &names] { return names.get(f); },
         [&f, &names](std::string_view k, std::string_view v) { f = names.parse(k, v); });
  }
  void add_negated(const std::string& name, bool& f) {
    push(name, [&f] { return std::string(f ? "false" : "true"); },
         [&f](std::string_view k, std::string_view v) { f = !parse_bool(k, v); });
  }

 private:
  void push(const std::string& name, std::function<std::string()> get,
            std::function<void(std::string_view, std::string_view)> set) {
    std::string key = section_.empty() ? name : section_ + "." + name;
    fields.push_back({key, std::move(get), [key, set = std::move(set)](std::string_view v) { set(key, v); }});
  }

  std::string section_;
};

std::vector<Field> fields_of(ExperimentConfig& c) {
  Registry r("");
  r.add("format_version", c.format_version);

  r.section("synth");
  synth::SynthConfig::for_each_field(c.synth, [&](const char* name, auto& value) { r.add(name, value); });

  r.section("model");
  auto& enc = c.model.encoder;
  r.add("max_len", enc.max_len);
  r.add("hidden", enc.hidden);
  r.add("layers", enc.layers);
  r.add("heads", enc.heads);
  r.add("ffn", enc.ffn);
  r.add("attn_dim", enc.attn_dim);
  r.add("dropout", enc.dropout);
  r.add("graph_hidden", c.model.graph_hidden);
  r.add("gnn_layers", c.model.gnn_layers);
  r.add("fusion_dim", c.model.fusion_dim);
  r.add("gate_dropout", c.model.gate_dropout);
  r.add("head_hidden", c.model.head_hidden);

  r.section("train");
  auto& t = c.train;
  r.add("batch_size", t.batch_size);
  r.add("text_pretrain_epochs", t.text_pretrain_epochs);
  r.add("graph_pretrain_epochs", t.graph_pretrain_epochs);
  r.add("joint_epochs", t.joint_epochs);
  r.add("pretrain_lr", t.pretrain_lr);
  r.add("lr", t.lr);
  r.add("lr_min", t.lr_min);
  r.add("warmup_frac", t.warmup_frac);
  r.add("text_lr_multiplier", t.text_lr_multiplier);
  r.add("burn_in_epochs", t.burn_in_epochs);
  r.add("patience", t.patience);
  r.add("val_fraction", t.val_fraction);
  r.add("threshold", t.threshold);
  r.add("mask_rate", t.mask_rate);
  r.add("edge_batch", t.edge_batch);
  r.add("weight_decay", t.adamw.weight_decay);
  r.add("beta1", t.adamw.beta1);
  r.add("beta2", t.adamw.beta2);
  r.add("eps", t.adamw.eps);
  r.add_enum("lambda_mode", t.lambda_mode, kLambdaNames);
  r.add("lambda0", t.lambda0);

  r.section("ablation");
  r.add("semantic_guide_off", c.model.semantic_guide_off);
  r.add_enum("norm_mode", c.model.norm, kNormNames);
  r.add_enum("fusion_mode", c.model.fusion_mode, kFusionNames);
  r.add_negated("relation_weights_off", c.model.relation_weights);
  r.add("skip_text_pretrain", t.skip_text_pretrain);
  r.add("skip_graph_pretrain", t.skip_graph_pretrain);

  r.section("benchmark");
  auto& b = c.benchmark;
  r.add("max_steps", b.max_steps);
  r.add("coverage", b.coverage);
  r.add("diffusion_threshold", b.diffusion_threshold);
  r.add("k_low", b.k_low);
  r.add("k_high", b.k_high);
  r.add("seeds_per_event", b.seeds_per_event);
  r.add("adopt_rate", b.adopt_rate);
  r.add("transmission", b.transmission);

  r.section("run");
  r.add("seeds", c.run.seeds);
  r.add("out_dir", c.run.out_dir);
  r.add("latency_samples", c.run.latency_samples);
  r.add("workers", c.run.workers);
  return std::move(r.fields);
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](std::string_view key, std::string_view why) {
    throw ConfigError(fmt::format("config key '{}': {}", key, why));
  };
  if (format_version != kConfigFormatVersion) {
    fail("format_version", fmt::format("unsupported version {} (expected {})", format_version, kConfigFormatVersion));
  }
  synth.validate();
  train.validate();
  const auto& enc = model.encoder;
  if (enc.max_len < 2) fail("model.max_len", "must be at least 2");
  if (enc.hidden == 0) fail("model.hidden", "must be positive");
  if (enc.heads == 0 || enc.hidden % enc.heads != 0) fail("model.heads", "must divide model.hidden");
  if (enc.ffn == 0) fail("model.ffn", "must be positive");
  if (!(enc.dropout >= 0.0 && enc.dropout < 1.0)) fail("model.dropout", "must lie in [0, 1)");
  if (model.graph_hidden == 0) fail("model.graph_hidden", "must be positive");
  if (model.fusion_dim == 0) fail("model.fusion_dim", "must be positive");
  if (model.head_hidden == 0) fail("model.head_hidden", "must be positive");
  if (!(model.gate_dropout >= 0.0 && model.gate_dropout < 1.0)) fail("model.gate_dropout", "must lie in [0, 1)");
  if (benchmark.max_steps == 0) fail("benchmark.max_steps", "must be positive");
  if (!(benchmark.coverage > 0.0 && benchmark.coverage <= 1.0)) fail("benchmark.coverage", "must lie in (0, 1]");
  if (!(benchmark.diffusion_threshold > 0.0 && benchmark.diffusion_threshold <= 1.0)) {
    fail("benchmark.diffusion_threshold", "must lie in (0, 1]");
  }
  if (benchmark.k_low >= benchmark.k_high) fail("benchmark.k_low", "must be below benchmark.k_high");
  if (benchmark.seeds_per_event == 0) fail("benchmark.seeds_per_event", "must be positive");
  if (!(benchmark.adopt_rate >= 0.0 && benchmark.adopt_rate <= 1.0)) fail("benchmark.adopt_rate", "must lie in [0, 1]");
  for (double p : benchmark.transmission) {
    if (!(p >= 0.0 && p <= 1.0)) fail("benchmark.transmission", "probabilities must lie in [0, 1]");
  }
  if (run.seeds.empty()) fail("run.seeds", "needs at least one seed");
  if (std::set<std::uint64_t>(run.seeds.begin(), run.seeds.end()).size() != run.seeds.size()) {
    fail("run.seeds", "seeds must be distinct");
  }
  if (run.workers == 0) fail("run.workers", "must be positive");
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (auto& f : fields_of(config)) {
    if (f.key == key) {
      f.set(trim(value));
      return;
    }
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

std::vector<std::string> config_keys() {
  ExperimentConfig c;
  std::vector<std::string> out;
  for (const auto& f : fields_of(c)) out.push_back(f.key);
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  config.format_version = 0;
  std::set<std::string> seen;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("config line {}: malformed section header", line_no));
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("config line {}: expected key = value", line_no));
    std::string name(trim(line.substr(0, eq)));
    std::string key = section.empty() ? name : section + "." + name;
    if (!seen.insert(key).second) throw ConfigError(fmt::format("config key '{}' appears twice", key));
    set_config_value(config, key, trim(line.substr(eq + 1)));
  }
  if (!seen.count("format_version")) throw ConfigError("config key 'format_version' is missing");
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  std::string out;
  std::string section;
  for (const auto& f : fields_of(copy)) {
    auto dot = f.key.find('.');
    std::string s = dot == std::string::npos ? "" : f.key.substr(0, dot);
    std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (s != section) {
      out += fmt::format("\n[{}]\n", s);
      section = s;
    }
    out += fmt::format("{} = {}\n", name, f.get());
  }
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dghif::app
