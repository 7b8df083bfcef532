#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpm/corpus.hpp"
#include "cpm/simplex.hpp"
#include "cpm/subspace.hpp"

namespace cpm {

inline constexpr int kDefaultTopWords = 10;
inline constexpr int kDefaultNearest = 3;

// Simplex vertices mapped back to vocabulary space, one column per vertex.
// Row i is the vertex-profile of word i.
struct VertexWordMatrix {
  Eigen::MatrixXd weights;  // F x (R+1)

  Eigen::Index num_words() const { return weights.rows(); }
  Eigen::Index num_vertices() const { return weights.cols(); }
};

VertexWordMatrix MakeVertexWordMatrix(const PcaModel& model, const Simplex& simplex);

// The k highest-weighted words of one vertex, descending; ties go to the
// lexicographically smaller word.
std::vector<std::string> TopWords(const VertexWordMatrix& v, const Vocabulary& vocab,
                                  Eigen::Index vertex, int k = kDefaultTopWords);

// Cosine of two word rows; 0 when either row is all zeros.
double WordSimilarity(const VertexWordMatrix& v, Eigen::Index i, Eigen::Index j);

struct TokenSimilarity {
  Tokens tokens;
  Eigen::MatrixXd raw;  // cosine similarities, t x t
  Eigen::MatrixXd hat;  // row softmax of raw
};

TokenSimilarity TokenSimilarityMatrix(const VertexWordMatrix& v,
                                      const Vocabulary& vocab, const Tokens& tokens);

// Numerically stable softmax of each row.
Eigen::MatrixXd RowSoftmax(const Eigen::MatrixXd& logits);

struct Neighbor {
  UtteranceId id;
  double distance;
};

// The m points closest to a vertex in the reduced space, ascending by
// distance, ties by utterance id.
std::vector<Neighbor> NearestUtterances(const ReducedPoints& points,
                                        const Simplex& simplex, Eigen::Index vertex,
                                        int m = kDefaultNearest);

// Clipped composition coefficients of a single token sequence: frequency
// vector, projection, then barycentric coordinates.
Eigen::VectorXd SequenceCoefficients(const Vocabulary& vocab, const PcaModel& model,
                                     const Simplex& simplex, const Tokens& tokens);

}  // namespace cpm
