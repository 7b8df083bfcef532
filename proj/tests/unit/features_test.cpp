#include "cpm/features.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "cpm/rng.hpp"
#include "oracles.hpp"

namespace cpm {
namespace {

const std::string kUnk(kUnkToken);

struct Pipeline {
  std::vector<Tokens> utterances;
  Vocabulary vocab;
  PcaModel pca;
  ReducedPoints points;
  Simplex simplex;
};

Pipeline BuildPipeline(std::uint64_t seed, int dim) {
  Rng rng(seed);
  const std::vector<std::vector<std::string>> topics = {
      {"train", "leaves", "monday", "cambridge", "depart"},
      {"hotel", "cheap", "parking", "wifi", "stars"},
      {"food", "italian", "centre", "table", "book"},
      {"taxi", "arrive", "pick", "up", "time"}};
  std::vector<Tokens> utts;
  for (int i = 0; i < 80; ++i) {
    const auto& t = topics[rng.Index(topics.size())];
    Tokens u;
    for (int w = 0; w < 5; ++w) u.push_back(t[rng.Index(t.size())]);
    if (rng.Uniform() < 0.5) u.push_back(topics[rng.Index(topics.size())][0]);
    if (rng.Uniform() < 0.3) u.push_back("?");
    utts.push_back(u);
  }
  Vocabulary vocab = BuildVocabulary(utts, 2);
  const UtteranceMatrix m = Vectorize(utts, vocab);
  PcaModel pca = FitPca(m, dim);
  ReducedPoints points = Project(pca, m);
  Simplex simplex = FitMves(points);
  return {utts, std::move(vocab), std::move(pca), std::move(points), std::move(simplex)};
}

TEST(VertexWordMatrix, MatchesBackprojection) {
  const Pipeline p = BuildPipeline(1, 3);
  const VertexWordMatrix v = MakeVertexWordMatrix(p.pca, p.simplex);
  EXPECT_EQ(v.num_words(), static_cast<Eigen::Index>(p.vocab.size()));
  EXPECT_EQ(v.num_vertices(), 4);
  const Eigen::MatrixXd back = Backproject(p.pca, p.simplex.vertices);
  for (Eigen::Index j = 0; j < 4; ++j) {
    EXPECT_LT((v.weights.col(j) - back.row(j).transpose()).norm(), 1e-14);
  }
}

TEST(VertexWordMatrix, OriginVertexIsMeanAndDuplicateVerticesMatch) {
  const Pipeline p = BuildPipeline(2, 2);
  Eigen::MatrixXd verts(3, 2);
  verts << 0, 0, 0.3, 0.1, 0.3, 0.1;
  const VertexWordMatrix v = MakeVertexWordMatrix(p.pca, MakeSimplex(verts));
  EXPECT_LT((v.weights.col(0) - p.pca.mean).norm(), 1e-15);
  EXPECT_EQ(v.weights.col(1), v.weights.col(2));
}

TEST(TopWords, DominantEntryFirstAndTies) {
  const Vocabulary vocab({"b", "a", "c", kUnk}, 1);
  VertexWordMatrix v{Eigen::MatrixXd::Zero(4, 2)};
  v.weights(2, 0) = 5.0;
  v.weights(0, 0) = 1.0;
  v.weights(1, 0) = 1.0;
  EXPECT_EQ(TopWords(v, vocab, 0, 3), (std::vector<std::string>{"c", "a", "b"}));
  // All-zero column: pure lexicographic order.
  EXPECT_EQ(TopWords(v, vocab, 1, 4),
            (std::vector<std::string>{kUnk, "a", "b", "c"}));
  EXPECT_THROW(TopWords(v, vocab, 2, 1), Error);
  EXPECT_THROW(TopWords(v, vocab, 0, 5), Error);
  EXPECT_THROW(TopWords(v, vocab, 0, 0), Error);
}

TEST(TopWords, FullListIsPermutationAndPrefixProperty) {
  const Pipeline p = BuildPipeline(3, 3);
  const VertexWordMatrix v = MakeVertexWordMatrix(p.pca, p.simplex);
  const int f = static_cast<int>(p.vocab.size());
  for (Eigen::Index j = 0; j < v.num_vertices(); ++j) {
    auto all = TopWords(v, p.vocab, j, f);
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end());
    auto words = p.vocab.words();
    std::sort(words.begin(), words.end());
    EXPECT_EQ(sorted, words);
    for (int k = 1; k < f; ++k) {
      const auto shorter = TopWords(v, p.vocab, j, k);
      const auto longer = TopWords(v, p.vocab, j, k + 1);
      EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), longer.begin()));
    }
    for (int i = 1; i < f; ++i) {
      EXPECT_GE(v.weights(static_cast<Eigen::Index>(p.vocab.IndexOf(all[i - 1])), j),
                v.weights(static_cast<Eigen::Index>(p.vocab.IndexOf(all[i])), j));
    }
  }
}

TEST(WordSimilarity, Basics) {
  VertexWordMatrix v{Eigen::MatrixXd(3, 2)};
  v.weights << 1, 0, 0, 1, 0, 0;
  EXPECT_NEAR(WordSimilarity(v, 0, 0), 1.0, 1e-15);
  EXPECT_EQ(WordSimilarity(v, 0, 1), 0.0);
  EXPECT_EQ(WordSimilarity(v, 2, 2), 0.0);
  EXPECT_THROW(WordSimilarity(v, 0, 3), Error);
}

TEST(WordSimilarity, MatchesDirectCosine) {
  Rng rng(4);
  VertexWordMatrix v{oracle::GaussianMatrix(12, 5, rng)};
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (int c = 0; c < 5; ++c) {
        dot += v.weights(i, c) * v.weights(j, c);
        ni += v.weights(i, c) * v.weights(i, c);
        nj += v.weights(j, c) * v.weights(j, c);
      }
      EXPECT_NEAR(WordSimilarity(v, i, j), dot / std::sqrt(ni * nj), 1e-12);
    }
  }
}

TEST(TokenSimilarity, IdenticalTokensAndOrthogonalPair) {
  const Vocabulary vocab({"x", "y", kUnk}, 1);
  VertexWordMatrix v{Eigen::MatrixXd(3, 2)};
  v.weights << 1, 0, 0, 1, 1, 1;
  const TokenSimilarity same = TokenSimilarityMatrix(v, vocab, {"x", "x", "x"});
  EXPECT_LT((same.raw.array() - 1.0).abs().maxCoeff(), 1e-15);
  EXPECT_LT((same.hat.array() - 1.0 / 3).abs().maxCoeff(), 1e-15);

  const TokenSimilarity pair = TokenSimilarityMatrix(v, vocab, {"x", "y"});
  EXPECT_LT((pair.raw - Eigen::Matrix2d::Identity()).norm(), 1e-15);
  const double e = std::exp(1.0);
  EXPECT_NEAR(pair.hat(0, 0), e / (e + 1), 1e-15);
  EXPECT_NEAR(pair.hat(0, 1), 1 / (e + 1), 1e-15);

  // Unknown tokens use the UNK row.
  const TokenSimilarity oov = TokenSimilarityMatrix(v, vocab, {"zebra", "x"});
  EXPECT_NEAR(oov.raw(0, 1), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(TokenSimilarityMatrix(v, vocab, {}), Error);
}

TEST(TokenSimilarity, RandomSequenceProperties) {
  const Pipeline p = BuildPipeline(5, 3);
  const VertexWordMatrix v = MakeVertexWordMatrix(p.pca, p.simplex);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Tokens t;
    const auto n = 1 + rng.Index(12);
    for (std::uint64_t i = 0; i < n; ++i) t.push_back(p.vocab.word(rng.Index(p.vocab.size())));
    const TokenSimilarity s = TokenSimilarityMatrix(v, p.vocab, t);
    EXPECT_LE((s.raw - s.raw.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(s.raw.maxCoeff(), 1.0);
    EXPECT_GE(s.raw.minCoeff(), -1.0);
    for (Eigen::Index i = 0; i < s.raw.rows(); ++i) {
      const auto w = static_cast<Eigen::Index>(p.vocab.IndexOf(t[static_cast<std::size_t>(i)]));
      if (v.weights.row(w).norm() > 0) EXPECT_NEAR(s.raw(i, i), 1.0, 1e-12);
      EXPECT_NEAR(s.hat.row(i).sum(), 1.0, 1e-9);
    }
  }
}

TEST(RowSoftmax, LargeLogitsStayFinite) {
  Eigen::MatrixXd logits(1, 3);
  logits << 1000, 1000, -1000;
  const Eigen::MatrixXd p = RowSoftmax(logits);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
  EXPECT_EQ(p(0, 2), 0.0);
}

TEST(NearestUtterances, VertexPointRankedFirstAndFullSort) {
  Rng rng(7);
  ReducedPoints pts;
  pts.coords = oracle::UniformPoints(100, 2, rng);
  for (int i = 0; i < 100; ++i) pts.utterance_ids.push_back(static_cast<UtteranceId>(1000 - i));
  const Simplex s = FitMves(pts);
  for (Eigen::Index j = 0; j < 3; ++j) {
    std::vector<std::pair<double, UtteranceId>> oracle_rank;
    for (int i = 0; i < 100; ++i) {
      oracle_rank.push_back({(pts.coords.row(i) - s.vertices.row(j)).norm(),
                             pts.utterance_ids[static_cast<std::size_t>(i)]});
    }
    std::sort(oracle_rank.begin(), oracle_rank.end());
    for (int m : {0, 1, 3, 17, 100}) {
      const auto got = NearestUtterances(pts, s, j, m);
      ASSERT_EQ(got.size(), static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) {
        EXPECT_EQ(got[static_cast<std::size_t>(i)].id, oracle_rank[static_cast<std::size_t>(i)].second);
        EXPECT_NEAR(got[static_cast<std::size_t>(i)].distance,
                    oracle_rank[static_cast<std::size_t>(i)].first, 1e-15);
      }
    }
  }
  ReducedPoints with_vertex = pts;
  with_vertex.coords.conservativeResize(101, 2);
  with_vertex.coords.row(100) = s.vertices.row(1);
  with_vertex.utterance_ids.push_back(1);
  const auto top = NearestUtterances(with_vertex, s, 1, 1);
  EXPECT_EQ(top[0].id, 1u);
  EXPECT_EQ(top[0].distance, 0.0);
  EXPECT_THROW(NearestUtterances(pts, s, 3, 1), Error);
  EXPECT_THROW(NearestUtterances(pts, s, 0, 101), Error);
}

TEST(SequenceCoefficients, MatchesDecomposeAllRow) {
  const Pipeline p = BuildPipeline(8, 3);
  const auto all = DecomposeAll(p.simplex, p.points);
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd a = SequenceCoefficients(p.vocab, p.pca, p.simplex, p.utterances[static_cast<std::size_t>(i)]);
    EXPECT_LT((a - all.coeffs.row(i).transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SequenceCoefficients, OrderInvariantAndOovAndEmpty) {
  const Pipeline p = BuildPipeline(9, 3);
  Tokens t = {"cheap", "hotel", "train", "?", "wifi", "hotel"};
  const Eigen::VectorXd a = SequenceCoefficients(p.vocab, p.pca, p.simplex, t);
  Rng rng(10);
  for (int k = 0; k < 10; ++k) {
    for (std::size_t i = t.size(); i > 1; --i) std::swap(t[i - 1], t[rng.Index(i)]);
    EXPECT_EQ(SequenceCoefficients(p.vocab, p.pca, p.simplex, t), a);
  }
  // All-OOV input: the UNK indicator column through the same pipeline.
  Eigen::VectorXd unk = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.vocab.size()));
  unk(static_cast<Eigen::Index>(p.vocab.unk_index())) = 1.0;
  const Eigen::VectorXd expected = ClipCoefficients(Barycentric(
      p.simplex, p.pca.basis.transpose() * (unk - p.pca.mean)));
  EXPECT_LT((SequenceCoefficients(p.vocab, p.pca, p.simplex, {"qqq", "zzz"}) - expected)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_THROW(SequenceCoefficients(p.vocab, p.pca, p.simplex, {}), Error);
}

}  // namespace
}  // namespace cpm
