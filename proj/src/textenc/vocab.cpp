#include "dghif/textenc/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "dghif/common/errors.hpp"

namespace dghif::text {

Vocab::Vocab() {
  for (const char* s : {"[PAD]", "[UNK]", "[MASK]", "[CLS]"}) add(s);
}

void Vocab::add(std::string token) {
  if (token.empty()) throw DataError("vocab: empty token at id " + std::to_string(tokens_.size()));
  if (!index_.emplace(token, tokens_.size()).second) throw DataError("vocab: duplicate token '" + token + "'");
  tokens_.push_back(std::move(token));
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("vocab: cannot open " + path.string());
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.add(line);
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("vocab: cannot write " + path.string());
  for (std::size_t id = kNumSpecial; id < tokens_.size(); ++id) out << tokens_[id] << '\n';
}

std::optional<std::size_t> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= tokens_.size()) throw DataError("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::size_t TokenSequence::real_length() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<std::size_t> token_ids(std::string_view text, const Vocab& vocab) {
  std::vector<std::size_t> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string word(text.substr(i, j - i));
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (auto id = vocab.find(word)) {
      ids.push_back(*id);
    } else {
      std::vector<std::size_t> chars;
      for (char c : word) {
        auto cid = vocab.find(std::string_view(&c, 1));
        if (!cid) break;
        chars.push_back(*cid);
      }
      if (chars.size() == word.size()) {
        ids.insert(ids.end(), chars.begin(), chars.end());
      } else {
        ids.push_back(kUnk);
      }
    }
    i = j;
  }
  return ids;
}

TokenSequence make_sequence(const std::vector<std::size_t>& ids, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be at least 1");
  TokenSequence seq;
  seq.ids.assign(max_len, kPad);
  seq.mask.assign(max_len, 0);
  seq.ids[0] = kCls;
  seq.mask[0] = 1;
  const std::size_t n = std::min(ids.size(), max_len - 1);
  for (std::size_t k = 0; k < n; ++k) {
    seq.ids[k + 1] = ids[k];
    seq.mask[k + 1] = 1;
  }
  return seq;
}

TokenSequence tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (vocab.regular_size() == 0) throw DataError("tokenize: vocabulary has no regular tokens");
  return make_sequence(token_ids(text, vocab), max_len);
}

}  // namespace dghif::text
