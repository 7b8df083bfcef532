#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "cpm/corpus.hpp"
#include "cpm/features.hpp"
#include "cpm/fusion.hpp"
#include "cpm/simplex.hpp"
#include "cpm/subspace.hpp"

namespace cpm {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct FitSettings {
  int dim = 0;
  int min_count = kDefaultMinCount;
  double slack = kDefaultSlack;
  std::uint64_t seed = 0;
  int restarts = MvesConfig{}.restarts;
};

struct Provenance {
  std::string corpus_path;
  std::size_t line_count = 0;  // utterance lines, comments excluded
  std::string timestamp;       // ISO-8601 UTC
};

// Everything needed to reproduce features for new text: vocabulary, the
// reduced subspace and the fitted simplex.
struct ModelArtifact {
  int schema_version = kSchemaVersion;
  Vocabulary vocabulary;
  PcaModel pca;
  Simplex simplex;
  FitSettings settings;
  Provenance provenance;
};

// {"shape": [rows, cols], "data": [row-major values]}
Json MatrixToJson(const Eigen::MatrixXd& m);
Eigen::MatrixXd MatrixFromJson(const Json& j);
Json VectorToJson(const Eigen::VectorXd& v);
Eigen::VectorXd VectorFromJson(const Json& j);

Json ToJson(const FitReport& report);
Json ToJson(const ModelArtifact& artifact);
ModelArtifact ArtifactFromJson(const Json& j);

void SaveArtifact(const ModelArtifact& artifact, const std::string& path);
ModelArtifact LoadArtifact(const std::string& path);

// Serialized bytes of an artifact; identical inputs give identical bytes.
std::string DumpArtifact(const ModelArtifact& artifact);

Json ToJson(const FusionLayer& layer);
FusionLayer LayerFromJson(const Json& j);

// RFC 4180 field quoting.
std::string CsvField(const std::string& field);

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double value);

// One table holding both matrices: columns matrix,token,<tokens...>, one row
// per (matrix, token) pair.
void WriteSimilarityCsv(const TokenSimilarity& sim, std::ostream& out);

}  // namespace cpm
