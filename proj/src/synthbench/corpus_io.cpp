#include "dghif/synthbench/corpus_io.hpp"

#include <fstream>
#include <sstream>
#include <type_traits>

#include <fmt/format.h>
#include "json.hpp"

#include "dghif/common/errors.hpp"

namespace dghif::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kFiles[] = {"users.csv", "posts.jsonl", "interactions.tsv", "vocab.txt"};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  return in;
}

json config_to_json(const SynthConfig& config) {
  json j = json::object();
  SynthConfig::for_each_field(config, [&](const char* name, const auto& value) { j[name] = value; });
  return j;
}

SynthConfig config_from_json(const json& j) {
  SynthConfig config;
  SynthConfig::for_each_field(config, [&](const char* name, auto& value) {
    if (!j.contains(name)) throw DataError(fmt::format("manifest config lacks '{}'", name));
    value = j.at(name).get<std::remove_reference_t<decltype(value)>>();
  });
  return config;
}

std::size_t parse_index(const std::string& text, const fs::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw DataError(fmt::format("{}:{}: '{}' is not a non-negative integer", file.string(), line, text));
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_corpus(const fs::path& dir, const SynthCorpus& corpus) {
  fs::create_directories(dir);
  fs::remove(dir / "manifest.json");
  graph::RelationSet relations;
  {
    auto out = open_out(dir / "users.csv");
    out << "id,label,community\n";
    for (const auto& u : corpus.users) out << u.id << ',' << u.label << ',' << u.community << '\n';
  }
  {
    auto out = open_out(dir / "posts.jsonl");
    for (const auto& p : corpus.posts) {
      json rec = {{"user_id", p.user}, {"tokens", p.tokens}, {"metaphor_flag", p.metaphor}};
      out << rec.dump() << '\n';
    }
  }
  {
    auto out = open_out(dir / "interactions.tsv");
    for (const auto& e : corpus.interactions) {
      out << e.actor << '\t' << relations.name(e.relation) << '\t' << e.target << '\n';
    }
  }
  {
    auto out = open_out(dir / "vocab.txt");
    for (const auto& t : corpus_vocabulary(corpus.config)) out << t << '\n';
  }

  json manifest = {{"format_version", kCorpusFormatVersion},
                   {"seed", corpus.config.seed},
                   {"config", config_to_json(corpus.config)},
                   {"users", corpus.users.size()},
                   {"posts", corpus.posts.size()},
                   {"interactions", corpus.interactions.size()}};
  json files = json::object();
  for (const char* name : kFiles) files[name] = fmt::format("{:016x}", file_hash(dir / name));
  manifest["files"] = files;
  fs::path tmp = dir / "manifest.json.tmp";
  {
    auto out = open_out(tmp);
    out << manifest.dump(2) << '\n';
  }
  fs::rename(tmp, dir / "manifest.json");
}

SynthCorpus read_corpus(const fs::path& dir) {
  fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError(fmt::format("{} has no manifest.json", dir.string()));
  json manifest;
  try {
    auto in = open_in(manifest_path);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
  if (manifest.value("format_version", -1) != kCorpusFormatVersion) {
    throw DataError(fmt::format("{}: unsupported format_version", manifest_path.string()));
  }
  for (const char* name : kFiles) {
    std::string expected = manifest.at("files").value(name, "");
    std::string actual = fmt::format("{:016x}", file_hash(dir / name));
    if (expected != actual) throw DataError(fmt::format("{}: hash mismatch for {}", dir.string(), name));
  }

  SynthCorpus corpus;
  try {
    corpus.config = config_from_json(manifest.at("config"));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: bad config: {}", manifest_path.string(), e.what()));
  }

  {
    fs::path path = dir / "users.csv";
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    for (std::size_t n = 2; std::getline(in, line); ++n) {
      auto f = split(line, ',');
      if (f.size() != 3) throw DataError(fmt::format("{}:{}: expected 3 fields", path.string(), n));
      SynthUser u{parse_index(f[0], path, n), static_cast<int>(parse_index(f[1], path, n)),
                  parse_index(f[2], path, n)};
      if (u.id != corpus.users.size()) throw DataError(fmt::format("{}:{}: ids must be 0..N-1 in order", path.string(), n));
      if (u.label > 1) throw DataError(fmt::format("{}:{}: label must be 0 or 1", path.string(), n));
      corpus.users.push_back(u);
    }
  }
  {
    fs::path path = dir / "posts.jsonl";
    auto in = open_in(path);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      try {
        json rec = json::parse(line);
        SynthPost p{rec.at("user_id").get<std::size_t>(), rec.at("tokens").get<std::vector<std::string>>(),
                    rec.at("metaphor_flag").get<bool>()};
        if (p.user >= corpus.users.size()) throw DataError(fmt::format("{}:{}: unknown user {}", path.string(), n, p.user));
        corpus.posts.push_back(std::move(p));
      } catch (const json::exception& e) {
        throw DataError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
      }
    }
  }
  corpus.interactions = graph::read_interactions(dir / "interactions.tsv", graph::RelationSet());
  return corpus;
}

}  // namespace dghif::synth
