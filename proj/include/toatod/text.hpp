#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace toatod {

using TokenSeq = std::vector<std::string>;
using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

// Lowercase, strip ASCII punctuation, trim and collapse internal whitespace.
std::string normalize_value(std::string_view raw);

// Lowercase and split on whitespace. Punctuation is kept so that placeholder
// tokens like "[value_phone]" survive.
TokenSeq tokenize(std::string_view text);

std::string join(const TokenSeq& tokens, std::string_view sep = " ");

// Word-level vocabulary. Ids are dense and stable: reserved tokens first, then
// every other token in lexicographic order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& extra_tokens);

  static const std::vector<std::string>& reserved_tokens();

  TokenId id(const std::string& token) const;
  const std::string& token(TokenId id) const;
  bool contains(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenIds encode(const TokenSeq& tokens) const;
  // Stops at the first end token; drops pad/bos.
  TokenSeq decode(const TokenIds& ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace toatod
