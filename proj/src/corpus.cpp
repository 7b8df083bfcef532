#include "cpm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "cpm/error.hpp"

namespace cpm {
namespace {

bool IsAsciiSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool IsAsciiPunct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) ||
         (c >= 0x5b && c <= 0x60) || (c >= 0x7b && c <= 0x7e);
}

}  // namespace

Tokens Tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsAsciiSpace(c)) {
      flush();
    } else if (IsAsciiPunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> words, int min_count)
    : words_(std::move(words)), min_count_(min_count) {
  if (words_.empty() || words_.back() != kUnkToken) {
    throw ValidationError("vocabulary must end with the " +
                          std::string(kUnkToken) + " sentinel");
  }
  if (min_count_ < 1) throw ValidationError("min_count must be >= 1");
  index_of_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_of_.emplace(words_[i], i).second) {
      throw ValidationError("duplicate vocabulary word: " + words_[i]);
    }
  }
}

std::size_t Vocabulary::IndexOf(std::string_view word) const {
  auto it = index_of_.find(std::string(word));
  return it == index_of_.end() ? unk_index() : it->second;
}

bool Vocabulary::Contains(std::string_view word) const {
  return index_of_.contains(std::string(word));
}

Vocabulary BuildVocabulary(std::span<const Tokens> utterances, int min_count) {
  if (min_count < 1) throw ValidationError("min_count must be >= 1");
  std::map<std::string, long> counts;
  for (const auto& utterance : utterances) {
    for (const auto& token : utterance) ++counts[token];
  }
  if (counts.empty()) throw ValidationError("empty corpus");

  std::vector<std::pair<std::string, long>> kept;
  for (auto& [word, count] : counts) {
    // A literal "[UNK]" cannot come out of Tokenize, but callers may pass
    // their own token lists.
    if (count >= min_count && word != kUnkToken) kept.emplace_back(word, count);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;  // map order already lexicographic
  });

  std::vector<std::string> words;
  words.reserve(kept.size() + 1);
  for (auto& entry : kept) words.push_back(std::move(entry.first));
  words.emplace_back(kUnkToken);
  return Vocabulary(std::move(words), min_count);
}

Eigen::VectorXd FrequencyVector(const Tokens& tokens, const Vocabulary& vocab) {
  if (tokens.empty()) throw ValidationError("empty token list");
  Eigen::VectorXd column = Eigen::VectorXd::Zero(vocab.size());
  for (const auto& token : tokens) column(vocab.IndexOf(token)) += 1.0;
  return column / static_cast<double>(tokens.size());
}

UtteranceMatrix Vectorize(std::span<const Tokens> utterances,
                          const Vocabulary& vocab,
                          std::span<const UtteranceId> ids) {
  if (vocab.size() == 0) throw ValidationError("empty vocabulary");
  if (!ids.empty() && ids.size() != utterances.size()) {
    throw ValidationError("utterance id count does not match utterances");
  }
  UtteranceMatrix out;
  std::vector<std::size_t> kept;
  for (std::size_t u = 0; u < utterances.size(); ++u) {
    const UtteranceId id = ids.empty() ? u : ids[u];
    if (utterances[u].empty()) {
      out.dropped_ids.push_back(id);
    } else {
      kept.push_back(u);
      out.utterance_ids.push_back(id);
    }
  }
  if (kept.empty()) throw ValidationError("no nonempty utterances");

  out.matrix.resize(static_cast<Eigen::Index>(vocab.size()),
                    static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    out.matrix.col(static_cast<Eigen::Index>(c)) =
        FrequencyVector(utterances[kept[c]], vocab);
  }
  return out;
}

CorpusFile ReadCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path);
  CorpusFile corpus;
  std::string line;
  UtteranceId line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') continue;
    corpus.texts.push_back(line);
    corpus.line_numbers.push_back(line_number);
  }
  if (in.bad()) throw IoError("error reading corpus: " + path);
  return corpus;
}

}  // namespace cpm
