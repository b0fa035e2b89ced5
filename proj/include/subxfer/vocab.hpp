#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace subxfer {

using TokenId = std::uint32_t;

/// Ordered set of unique tokens with dense ids 0..size()-1.
class Vocab {
 public:
  Vocab() = default;
  /// Throws ValidationError on duplicate or empty tokens.
  explicit Vocab(std::vector<std::string> tokens);

  /// Appends `token` if absent; returns its id either way.
  TokenId insert(std::string_view token);

  std::optional<TokenId> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// One token per line; the line number is the id.
Vocab read_vocab(const std::filesystem::path& path);
void write_vocab(const Vocab& vocab, const std::filesystem::path& path);

}  // namespace subxfer
