// Tokenization and vocabulary indexing shared by training and evaluation.
#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vexpl {

using TokenId = int;

/// Vocabulary indices of one sentence, without SOS and terminated by exactly one EOS.
using TokenSequence = std::vector<TokenId>;

/// Lowercases, strips punctuation and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr TokenId kSos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr int kReserved = 3;

  static const std::string& sos_token();
  static const std::string& eos_token();
  static const std::string& unk_token();

  /// Reserved-only vocabulary.
  Vocabulary();
  /// `words` excludes the reserved tokens; indices are assigned in order after them.
  explicit Vocabulary(const std::vector<std::string>& words);

  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(std::string_view token) const;
  /// Index of `token`, or kUnk when absent.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Maps words to ids, truncating to at most max_len tokens including the trailing EOS.
  /// Sets *truncated when words had to be dropped.
  TokenSequence encode(const std::vector<std::string>& words, int max_len,
                       bool* truncated = nullptr) const;
  /// Token strings of a sequence with the EOS (and anything after it) dropped.
  std::vector<std::string> decode(const TokenSequence& seq) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Throws DimensionError unless seq is nonempty, ends with its only EOS, has valid ids
/// and length <= max_len.
void validate_sequence(const TokenSequence& seq, int vocab_size, int max_len);

std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

}  // namespace vexpl
