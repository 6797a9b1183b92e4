#include "toatod/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "toatod/error.hpp"

namespace toatod {

std::string normalize_value(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::ispunct(uc)) continue;
    if (std::isspace(uc)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join(const TokenSeq& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> reserved = {
      "<pad>", "<bos>", "<eos>", "<unk>", "<user>", "<sys>", "<belief>", "<db>",
      "[db_none]", "[db_one]", "[db_few]", "[db_many]"};
  return reserved;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& extra_tokens) {
  tokens_ = reserved_tokens();
  std::set<std::string> rest(extra_tokens.begin(), extra_tokens.end());
  for (const auto& r : reserved_tokens()) rest.erase(r);
  tokens_.insert(tokens_.end(), rest.begin(), rest.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ContractError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

TokenIds Vocabulary::encode(const TokenSeq& tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenSeq Vocabulary::decode(const TokenIds& ids) const {
  TokenSeq out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

}  // namespace toatod
