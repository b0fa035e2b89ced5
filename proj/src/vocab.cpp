#include "subxfer/vocab.hpp"

#include <fstream>

#include "subxfer/corpus_io.hpp"
#include "subxfer/error.hpp"

namespace subxfer {

namespace {

void check_token(std::string_view token) {
  if (token.empty()) throw ValidationError("vocabulary tokens must be non-empty");
  if (token.find_first_of("\n\r") != std::string_view::npos) {
    throw ValidationError("vocabulary token contains a line break");
  }
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) {
  tokens_.reserve(tokens.size());
  ids_.reserve(tokens.size());
  for (auto& t : tokens) {
    check_token(t);
    const auto id = static_cast<TokenId>(tokens_.size());
    if (!ids_.emplace(t, id).second) throw ValidationError("duplicate vocabulary token '" + t + "'");
    tokens_.push_back(std::move(t));
  }
}

TokenId Vocab::insert(std::string_view token) {
  if (auto id = find(token)) return *id;
  check_token(token);
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

Vocab read_vocab(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  try {
    return Vocab(std::move(lines));
  } catch (const ValidationError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& t : vocab.tokens()) out << t << '\n';
  });
}

}  // namespace subxfer
