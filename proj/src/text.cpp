#include "vexpl/text.hpp"

#include "vexpl/netcore.hpp"

#include <cctype>
#include <stdexcept>

namespace vexpl {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (std::ispunct(c)) {
      continue;
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

const std::string& Vocabulary::sos_token() {
  static const std::string s = "<s>";
  return s;
}
const std::string& Vocabulary::eos_token() {
  static const std::string s = "</s>";
  return s;
}
const std::string& Vocabulary::unk_token() {
  static const std::string s = "<unk>";
  return s;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  tokens_ = {sos_token(), eos_token(), unk_token()};
  tokens_.insert(tokens_.end(), words.begin(), words.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size()) throw DimensionError("vocabulary: token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSequence Vocabulary::encode(const std::vector<std::string>& words, int max_len,
                                 bool* truncated) const {
  if (max_len < 1) throw std::invalid_argument("encode: max_len must be >= 1");
  TokenSequence seq;
  const auto body = std::min<std::size_t>(words.size(), static_cast<std::size_t>(max_len - 1));
  for (std::size_t i = 0; i < body; ++i) seq.push_back(id(words[i]));
  seq.push_back(kEos);
  if (truncated != nullptr) *truncated = body < words.size();
  return seq;
}

std::vector<std::string> Vocabulary::decode(const TokenSequence& seq) const {
  std::vector<std::string> words;
  for (TokenId t : seq) {
    if (t == kEos) break;
    words.push_back(token(t));
  }
  return words;
}

void validate_sequence(const TokenSequence& seq, int vocab_size, int max_len) {
  if (seq.empty()) throw DimensionError("token sequence is empty");
  if (static_cast<int>(seq.size()) > max_len) {
    throw DimensionError("token sequence of length " + std::to_string(seq.size()) +
                         " exceeds max_len " + std::to_string(max_len));
  }
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] < 0 || seq[i] >= vocab_size) throw DimensionError("token id out of vocabulary range");
    const bool last = i + 1 == seq.size();
    if ((seq[i] == Vocabulary::kEos) != last) {
      throw DimensionError("token sequence must contain exactly one EOS, at the end");
    }
  }
}

std::string join(const std::vector<std::string>& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += sep;
    out += words[i];
  }
  return out;
}

}  // namespace vexpl
