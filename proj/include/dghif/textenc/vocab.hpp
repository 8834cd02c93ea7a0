#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dghif::text {

inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kUnk = 1;
inline constexpr std::size_t kMask = 2;
inline constexpr std::size_t kCls = 3;
inline constexpr std::size_t kNumSpecial = 4;

/// Token table with the four reserved ids 0-3 followed by regular tokens.
class Vocab {
 public:
  Vocab();

  /// Regular tokens get ids kNumSpecial, kNumSpecial+1, ... in order.
  static Vocab from_tokens(const std::vector<std::string>& tokens);
  /// One token per line; line n (0-based) gets id n + kNumSpecial.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t regular_size() const noexcept { return tokens_.size() - kNumSpecial; }
  std::optional<std::size_t> find(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  static bool is_special(std::size_t id) noexcept { return id < kNumSpecial; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A padded/truncated id sequence with CLS in front.
struct TokenSequence {
  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> mask;  // 1 on real tokens (including CLS), 0 on PAD
  bool metaphor = false;
  std::size_t post_id = 0;

  std::size_t real_length() const noexcept;
};

/// Lowercased whitespace tokenization. A word missing from the vocabulary is
/// spelled out character by character when every character is known, and
/// becomes a single UNK otherwise.
std::vector<std::size_t> token_ids(std::string_view text, const Vocab& vocab);

/// CLS + token ids, truncated or PAD-filled to exactly max_len.
TokenSequence tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len);
TokenSequence make_sequence(const std::vector<std::size_t>& ids, std::size_t max_len);

}  // namespace dghif::text
