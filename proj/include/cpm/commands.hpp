#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cpm/artifact.hpp"
#include "cpm/attribution.hpp"
#include "cpm/features.hpp"

namespace cpm {

struct FitOptions {
  std::string corpus;
  std::string out;
  FitSettings settings;
  std::string emit_points;  // optional scatter data file
};

// Corpus -> vocabulary -> PCA -> simplex. Writes the artifact (and the
// scatter file when requested) and returns the one-line summary.
Json RunFit(const FitOptions& options);

// Reads the corpus, returns the artifact without writing anything.
ModelArtifact FitArtifact(const FitOptions& options);

// SOURCE_DATE_EPOCH when set, else the file's modification time, as
// ISO-8601 UTC. Keeps repeated fits byte-identical.
std::string ProvenanceTimestamp(const std::string& corpus_path);

// nullopt vertex means every vertex.
Json TopWordsReport(const ModelArtifact& model, std::optional<int> vertex, int k);

Json NearestReport(const ModelArtifact& model, const std::string& corpus_path,
                   int vertex, int m);

Json CoefficientsReport(const ModelArtifact& model, const std::string& text);

TokenSimilarity SimilarityFor(const ModelArtifact& model, const std::string& text);
Json SimilarityReport(const TokenSimilarity& sim);

struct AttendOptions {
  int heads = 2;
  int head_dim = 8;
  int model_dim = 0;  // 0: heads * head_dim
  std::uint64_t seed = 0;
  bool vanilla = false;
  bool zero_gates = false;
};

// Everything the toy layer needs for one text.
struct FusionInputs {
  Tokens tokens;
  FusionLayer layer;
  Eigen::MatrixXd embeddings;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd m_hat;
};

FusionInputs PrepareFusion(const ModelArtifact& model, const std::string& text,
                           const AttendOptions& options);

Json AttendReport(const ModelArtifact& model, const std::string& text,
                  const AttendOptions& options);

enum class AttributionTarget { kVertexCoefficients, kTokens };

struct AttributeOptions {
  AttendOptions layer;
  AttributionTarget target = AttributionTarget::kVertexCoefficients;
  int steps = kDefaultIgSteps;
  int top = kDefaultImportantVertices;
};

Json AttributeReport(const ModelArtifact& model, const std::string& text,
                     const AttributeOptions& options);

// CPM_SEED if set and parseable, else 0.
std::uint64_t DefaultSeed();

// Full command line. Results go to `out`, diagnostics and error JSON to
// `err`. Returns the process exit code: 0 ok, 1 I/O, 2 validation or math.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cpm
