#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace cpm {

using Tokens = std::vector<std::string>;
using UtteranceId = std::size_t;

inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr int kDefaultMinCount = 2;

// Lowercases ASCII letters, splits on whitespace and isolates every ASCII
// punctuation character as its own token. Bytes >= 0x80 are kept verbatim
// so UTF-8 sequences stay intact.
Tokens Tokenize(std::string_view text);

// Word <-> index map. Words are ordered by descending corpus count, ties
// broken lexicographically, with the UNK sentinel always last.
class Vocabulary {
 public:
  // Rebuilds a vocabulary from a persisted word list. The list must be
  // duplicate-free and end with the UNK sentinel.
  Vocabulary(std::vector<std::string> words, int min_count);

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t index) const { return words_.at(index); }
  std::size_t unk_index() const { return words_.size() - 1; }
  int min_count() const { return min_count_; }

  // Index of `word`, or unk_index() for anything not in the vocabulary.
  std::size_t IndexOf(std::string_view word) const;
  bool Contains(std::string_view word) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_of_;
  int min_count_;
};

Vocabulary BuildVocabulary(std::span<const Tokens> utterances,
                           int min_count = kDefaultMinCount);

// Column-per-utterance bag-of-words matrix; every column sums to one.
struct UtteranceMatrix {
  Eigen::MatrixXd matrix;  // F x n
  std::vector<UtteranceId> utterance_ids;
  std::vector<UtteranceId> dropped_ids;  // utterances with no tokens

  Eigen::Index vocabulary_size() const { return matrix.rows(); }
  Eigen::Index num_utterances() const { return matrix.cols(); }
};

// Counts tokens per utterance (out-of-vocabulary tokens fall into UNK) and
// sum-normalizes each column. Empty utterances are dropped. When `ids` is
// empty the utterances are numbered 0..n-1.
UtteranceMatrix Vectorize(std::span<const Tokens> utterances,
                          const Vocabulary& vocab,
                          std::span<const UtteranceId> ids = {});

// Normalized frequency vector of a single token list. Throws on empty input.
Eigen::VectorXd FrequencyVector(const Tokens& tokens, const Vocabulary& vocab);

// One utterance per line; lines starting with '#' are skipped. Line numbers
// (1-based) become the utterance ids.
struct CorpusFile {
  std::vector<std::string> texts;
  std::vector<UtteranceId> line_numbers;
};

CorpusFile ReadCorpus(const std::string& path);

}  // namespace cpm
