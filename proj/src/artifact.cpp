#include "cpm/artifact.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cpm/error.hpp"

namespace cpm {
namespace {

const Json& Field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string("artifact is missing field '") + key + "'");
  }
  return j.at(key);
}

template <typename T>
T Get(const Json& j, const char* key) {
  try {
    return Field(j, key).get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("bad field '") + key + "': " + e.what());
  }
}

void ExpectShape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                 const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ValidationError(what + " has shape " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

Json MatrixToJson(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return Json{{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

Eigen::MatrixXd MatrixFromJson(const Json& j) {
  const auto shape = Get<std::vector<Eigen::Index>>(j, "shape");
  const auto data = Get<std::vector<double>>(j, "data");
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != data.size()) {
    throw ValidationError("matrix shape does not match its data");
  }
  Eigen::MatrixXd m(shape[0], shape[1]);
  for (Eigen::Index i = 0; i < shape[0]; ++i)
    for (Eigen::Index c = 0; c < shape[1]; ++c)
      m(i, c) = data[static_cast<std::size_t>(i * shape[1] + c)];
  return m;
}

Json VectorToJson(const Eigen::VectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd VectorFromJson(const Json& j) {
  std::vector<double> values;
  try {
    values = j.get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("bad vector: ") + e.what());
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

Json ToJson(const FitReport& report) {
  return Json{{"iterations", report.iterations},
              {"final_volume", report.final_volume},
              {"max_violation", report.max_violation},
              {"restarts", report.restarts},
              {"volume_history", report.volume_history}};
}

Json ToJson(const ModelArtifact& a) {
  Json j;
  j["schema_version"] = a.schema_version;
  j["config"] = {{"dim", a.settings.dim},
                 {"min_count", a.settings.min_count},
                 {"slack", a.settings.slack},
                 {"seed", a.settings.seed},
                 {"restarts", a.settings.restarts}};
  j["provenance"] = {{"corpus_path", a.provenance.corpus_path},
                     {"line_count", a.provenance.line_count},
                     {"timestamp", a.provenance.timestamp}};
  j["vocabulary"] = {{"min_count", a.vocabulary.min_count()},
                     {"words", a.vocabulary.words()}};
  j["pca"] = {{"dim", a.pca.dim()},
              {"input_dim", a.pca.input_dim()},
              {"mean", VectorToJson(a.pca.mean)},
              {"basis", MatrixToJson(a.pca.basis)},
              {"eigenvalues", VectorToJson(a.pca.eigenvalues)},
              {"total_variance", a.pca.total_variance}};
  j["simplex"] = {{"vertices", MatrixToJson(a.simplex.vertices)},
                  {"volume", a.simplex.volume},
                  {"slack", a.simplex.slack},
                  {"fit_report", ToJson(a.simplex.fit_report)}};
  return j;
}

ModelArtifact ArtifactFromJson(const Json& j) {
  const int version = Get<int>(j, "schema_version");
  if (version != kSchemaVersion) {
    throw ValidationError("schema_version mismatch: expected " +
                          std::to_string(kSchemaVersion) + ", found " +
                          std::to_string(version));
  }
  const Json& vocab_json = Field(j, "vocabulary");
  Vocabulary vocabulary(Get<std::vector<std::string>>(vocab_json, "words"),
                        Get<int>(vocab_json, "min_count"));

  const Json& pca_json = Field(j, "pca");
  PcaModel pca;
  pca.mean = VectorFromJson(Field(pca_json, "mean"));
  pca.basis = MatrixFromJson(Field(pca_json, "basis"));
  pca.eigenvalues = VectorFromJson(Field(pca_json, "eigenvalues"));
  pca.total_variance = Get<double>(pca_json, "total_variance");
  const auto dim = Get<Eigen::Index>(pca_json, "dim");
  const auto features = static_cast<Eigen::Index>(vocabulary.size());
  ExpectShape(pca.basis, features, dim, "pca.basis");
  if (pca.mean.size() != features || pca.eigenvalues.size() != dim) {
    throw ValidationError("pca mean/eigenvalue sizes are inconsistent");
  }

  const Json& simplex_json = Field(j, "simplex");
  Simplex simplex;
  simplex.vertices = MatrixFromJson(Field(simplex_json, "vertices"));
  ExpectShape(simplex.vertices, dim + 1, dim, "simplex.vertices");
  simplex.volume = Get<double>(simplex_json, "volume");
  simplex.slack = Get<double>(simplex_json, "slack");
  const Json& report = Field(simplex_json, "fit_report");
  simplex.fit_report.iterations = Get<int>(report, "iterations");
  simplex.fit_report.final_volume = Get<double>(report, "final_volume");
  simplex.fit_report.max_violation = Get<double>(report, "max_violation");
  simplex.fit_report.restarts = Get<int>(report, "restarts");
  simplex.fit_report.volume_history = Get<std::vector<double>>(report, "volume_history");

  const Json& config = Field(j, "config");
  FitSettings settings;
  settings.dim = Get<int>(config, "dim");
  settings.min_count = Get<int>(config, "min_count");
  settings.slack = Get<double>(config, "slack");
  settings.seed = Get<std::uint64_t>(config, "seed");
  settings.restarts = Get<int>(config, "restarts");

  const Json& prov = Field(j, "provenance");
  Provenance provenance{Get<std::string>(prov, "corpus_path"),
                        Get<std::size_t>(prov, "line_count"),
                        Get<std::string>(prov, "timestamp")};

  return ModelArtifact{version,         std::move(vocabulary), std::move(pca),
                       std::move(simplex), settings,          std::move(provenance)};
}

std::string DumpArtifact(const ModelArtifact& artifact) {
  return ToJson(artifact).dump(1) + "\n";
}

void SaveArtifact(const ModelArtifact& artifact, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model: " + path);
  out << DumpArtifact(artifact);
  if (!out) throw IoError("error writing model: " + path);
}

ModelArtifact LoadArtifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("model is not valid JSON: " + std::string(e.what()));
  }
  return ArtifactFromJson(j);
}

Json ToJson(const FusionLayer& layer) {
  Json tensors = Json::object();
  for (std::size_t h = 0; h < layer.head.size(); ++h) {
    const std::string p = "head" + std::to_string(h) + ".";
    const HeadWeights& w = layer.head[h];
    tensors[p + "query"] = MatrixToJson(w.query);
    tensors[p + "key"] = MatrixToJson(w.key);
    tensors[p + "value"] = MatrixToJson(w.value);
    tensors[p + "context_query"] = MatrixToJson(w.context_query);
    tensors[p + "context_key"] = MatrixToJson(w.context_key);
    tensors[p + "gate_query"] = MatrixToJson(w.gate_query);
    tensors[p + "gate_key"] = MatrixToJson(w.gate_key);
  }
  tensors["context_gate_query"] = MatrixToJson(layer.context_gate_query);
  tensors["context_gate_key"] = MatrixToJson(layer.context_gate_key);
  return Json{{"heads", layer.heads},           {"head_dim", layer.head_dim},
              {"model_dim", layer.model_dim},   {"num_vertices", layer.num_vertices},
              {"seed", layer.seed},             {"tensors", std::move(tensors)}};
}

FusionLayer LayerFromJson(const Json& j) {
  FusionLayer layer;
  layer.heads = Get<int>(j, "heads");
  layer.head_dim = Get<int>(j, "head_dim");
  layer.model_dim = Get<int>(j, "model_dim");
  layer.num_vertices = Get<int>(j, "num_vertices");
  layer.seed = Get<std::uint64_t>(j, "seed");
  if (layer.heads < 1 || layer.head_dim < 1 || layer.model_dim < 1 ||
      layer.num_vertices < 2) {
    throw ValidationError("layer dimensions out of range");
  }
  const Json& tensors = Field(j, "tensors");
  auto matrix = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m = MatrixFromJson(Field(tensors, name.c_str()));
    ExpectShape(m, rows, cols, name);
    return m;
  };
  const int d = layer.head_dim;
  layer.head.resize(static_cast<std::size_t>(layer.heads));
  for (int h = 0; h < layer.heads; ++h) {
    const std::string p = "head" + std::to_string(h) + ".";
    HeadWeights& w = layer.head[static_cast<std::size_t>(h)];
    w.query = matrix(p + "query", layer.model_dim, d);
    w.key = matrix(p + "key", layer.model_dim, d);
    w.value = matrix(p + "value", layer.model_dim, d);
    w.context_query = matrix(p + "context_query", layer.num_vertices, d);
    w.context_key = matrix(p + "context_key", layer.num_vertices, d);
    w.gate_query = matrix(p + "gate_query", d, 1);
    w.gate_key = matrix(p + "gate_key", d, 1);
  }
  layer.context_gate_query = matrix("context_gate_query", d, 1);
  layer.context_gate_key = matrix("context_gate_key", d, 1);
  return layer;
}

std::string CsvField(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

std::string FormatDouble(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

void WriteSimilarityCsv(const TokenSimilarity& sim, std::ostream& out) {
  out << "matrix,token";
  for (const auto& token : sim.tokens) out << ',' << CsvField(token);
  out << "\r\n";
  auto rows = [&](const char* name, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << name << ',' << CsvField(sim.tokens[static_cast<std::size_t>(i)]);
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << FormatDouble(m(i, c));
      out << "\r\n";
    }
  };
  rows("raw", sim.raw);
  rows("hat", sim.hat);
}

}  // namespace cpm
