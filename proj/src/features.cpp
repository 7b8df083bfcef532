#include "cpm/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cpm/error.hpp"

namespace cpm {
namespace {

void CheckVertex(Eigen::Index vertex, Eigen::Index count) {
  if (vertex < 0 || vertex >= count) {
    throw ValidationError("vertex index " + std::to_string(vertex) +
                          " out of range [0, " + std::to_string(count) + ")");
  }
}

}  // namespace

VertexWordMatrix MakeVertexWordMatrix(const PcaModel& model, const Simplex& simplex) {
  if (simplex.dim() != model.dim()) {
    throw ValidationError("simplex dimension does not match the PCA model");
  }
  return VertexWordMatrix{Backproject(model, simplex.vertices).transpose()};
}

std::vector<std::string> TopWords(const VertexWordMatrix& v, const Vocabulary& vocab,
                                  Eigen::Index vertex, int k) {
  CheckVertex(vertex, v.num_vertices());
  if (static_cast<std::size_t>(v.num_words()) != vocab.size()) {
    throw ValidationError("vertex-word matrix does not match the vocabulary");
  }
  if (k < 1 || k > v.num_words()) {
    throw ValidationError("k must be in [1, " + std::to_string(v.num_words()) + "]");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(v.num_words()));
  std::iota(order.begin(), order.end(), 0);
  const auto column = v.weights.col(vertex);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (column(a) != column(b)) return column(a) > column(b);
                      return vocab.word(a) < vocab.word(b);
                    });
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) words.push_back(vocab.word(order[i]));
  return words;
}

double WordSimilarity(const VertexWordMatrix& v, Eigen::Index i, Eigen::Index j) {
  if (i < 0 || j < 0 || i >= v.num_words() || j >= v.num_words()) {
    throw ValidationError("word index out of range");
  }
  const double ni = v.weights.row(i).norm();
  const double nj = v.weights.row(j).norm();
  if (ni == 0.0 || nj == 0.0) return 0.0;
  const double cosine = v.weights.row(i).dot(v.weights.row(j)) / (ni * nj);
  return std::clamp(cosine, -1.0, 1.0);
}

Eigen::MatrixXd RowSoftmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - top).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

TokenSimilarity TokenSimilarityMatrix(const VertexWordMatrix& v,
                                      const Vocabulary& vocab, const Tokens& tokens) {
  if (tokens.empty()) throw ValidationError("empty token list");
  if (static_cast<std::size_t>(v.num_words()) != vocab.size()) {
    throw ValidationError("vertex-word matrix does not match the vocabulary");
  }
  const auto t = static_cast<Eigen::Index>(tokens.size());
  std::vector<Eigen::Index> rows(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    rows[i] = static_cast<Eigen::Index>(vocab.IndexOf(tokens[i]));
  }
  TokenSimilarity out;
  out.tokens = tokens;
  out.raw.resize(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = i; j < t; ++j) {
      const double s = WordSimilarity(v, rows[i], rows[j]);
      out.raw(i, j) = s;
      out.raw(j, i) = s;
    }
  }
  out.hat = RowSoftmax(out.raw);
  return out;
}

std::vector<Neighbor> NearestUtterances(const ReducedPoints& points,
                                        const Simplex& simplex, Eigen::Index vertex,
                                        int m) {
  CheckVertex(vertex, simplex.num_vertices());
  if (points.dim() != simplex.dim()) {
    throw ValidationError("points and simplex dimensions differ");
  }
  if (m < 0 || m > points.size()) {
    throw ValidationError("m must be in [0, " + std::to_string(points.size()) + "]");
  }
  std::vector<Neighbor> all;
  all.reserve(static_cast<std::size_t>(points.size()));
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    all.push_back({points.utterance_ids[static_cast<std::size_t>(i)],
                   (points.coords.row(i) - simplex.vertices.row(vertex)).norm()});
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + m, all.end(), closer);
  all.resize(static_cast<std::size_t>(m));
  return all;
}

Eigen::VectorXd SequenceCoefficients(const Vocabulary& vocab, const PcaModel& model,
                                     const Simplex& simplex, const Tokens& tokens) {
  const Eigen::VectorXd frequencies = FrequencyVector(tokens, vocab);
  const Eigen::VectorXd point = ProjectOne(model, frequencies);
  return ClipCoefficients(Barycentric(simplex, point));
}

}  // namespace cpm
