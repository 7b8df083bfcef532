#include "cpm/commands.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cpm/error.hpp"
#include "cpm/rng.hpp"

namespace cpm {
namespace {

Json Rows(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows.back()[j] = m(i, j);
  }
  return rows;
}

std::vector<Tokens> TokenizeAll(const std::vector<std::string>& texts) {
  std::vector<Tokens> tokens;
  tokens.reserve(texts.size());
  for (const auto& t : texts) tokens.push_back(Tokenize(t));
  return tokens;
}

void CheckVertex(const ModelArtifact& model, long vertex) {
  if (vertex < 0 || vertex >= model.simplex.num_vertices()) {
    throw ValidationError("unknown vertex " + std::to_string(vertex) + " (model has " +
                          std::to_string(model.simplex.num_vertices()) + ")");
  }
}

Tokens NonEmptyTokens(const std::string& text) {
  Tokens tokens = Tokenize(text);
  if (tokens.empty()) throw ValidationError("text has no tokens");
  return tokens;
}

void WriteJsonFile(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1) << "\n";
  if (!out) throw IoError("error writing " + path);
}

}  // namespace

std::uint64_t DefaultSeed() {
  const char* env = std::getenv("CPM_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(env, &end, 10);
  return (end != nullptr && *end == '\0') ? value : 0;
}

std::string ProvenanceTimestamp(const std::string& corpus_path) {
  std::time_t when = 0;
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (epoch != nullptr && *epoch != '\0') {
    when = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    struct stat info {};
    if (::stat(corpus_path.c_str(), &info) != 0) {
      throw IoError("cannot stat corpus: " + corpus_path);
    }
    when = info.st_mtime;
  }
  std::tm utc{};
  gmtime_r(&when, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

ModelArtifact FitArtifact(const FitOptions& options) {
  const FitSettings& s = options.settings;
  if (s.dim < 1) throw ValidationError("dim must be >= 1");
  if (!(s.slack >= 0.0)) throw ValidationError("slack must be >= 0");
  if (s.restarts < 0) throw ValidationError("restarts must be >= 0");

  const CorpusFile corpus = ReadCorpus(options.corpus);
  const std::vector<Tokens> tokens = TokenizeAll(corpus.texts);
  Vocabulary vocab = BuildVocabulary(tokens, s.min_count);
  const UtteranceMatrix data = Vectorize(tokens, vocab, corpus.line_numbers);
  PcaModel pca = FitPca(data, s.dim);
  const ReducedPoints points = Project(pca, data);

  MvesConfig config;
  config.slack = s.slack;
  config.seed = s.seed;
  config.restarts = s.restarts;
  Simplex simplex = FitMves(points, config);

  return ModelArtifact{kSchemaVersion, std::move(vocab), std::move(pca),
                       std::move(simplex), s,
                       Provenance{options.corpus, corpus.texts.size(),
                                  ProvenanceTimestamp(options.corpus)}};
}

Json RunFit(const FitOptions& options) {
  const ModelArtifact artifact = FitArtifact(options);
  SaveArtifact(artifact, options.out);

  if (!options.emit_points.empty()) {
    const CorpusFile corpus = ReadCorpus(options.corpus);
    const UtteranceMatrix data =
        Vectorize(TokenizeAll(corpus.texts), artifact.vocabulary, corpus.line_numbers);
    const ReducedPoints points = Project(artifact.pca, data);
    WriteJsonFile(Json{{"dim", artifact.pca.dim()},
                       {"utterance_ids", points.utterance_ids},
                       {"points", Rows(points.coords)},
                       {"vertices", Rows(artifact.simplex.vertices)}},
                  options.emit_points);
  }

  const FitReport& report = artifact.simplex.fit_report;
  return Json{{"command", "fit"},
              {"out", options.out},
              {"dim", artifact.pca.dim()},
              {"vocabulary_size", artifact.vocabulary.size()},
              {"utterances", artifact.provenance.line_count},
              {"volume", artifact.simplex.volume},
              {"iterations", report.iterations},
              {"max_violation", report.max_violation},
              {"restarts", report.restarts}};
}

Json TopWordsReport(const ModelArtifact& model, std::optional<int> vertex, int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  const VertexWordMatrix v = MakeVertexWordMatrix(model.pca, model.simplex);
  k = std::min<int>(k, static_cast<int>(v.num_words()));
  Json vertices = Json::array();
  auto add = [&](long j) {
    vertices.push_back(Json{{"vertex", j}, {"words", TopWords(v, model.vocabulary, j, k)}});
  };
  if (vertex) {
    CheckVertex(model, *vertex);
    add(*vertex);
  } else {
    for (long j = 0; j < model.simplex.num_vertices(); ++j) add(j);
  }
  return Json{{"command", "topwords"}, {"k", k}, {"vertices", std::move(vertices)}};
}

Json NearestReport(const ModelArtifact& model, const std::string& corpus_path,
                   int vertex, int m) {
  CheckVertex(model, vertex);
  if (m < 1) throw ValidationError("m must be >= 1");
  const CorpusFile corpus = ReadCorpus(corpus_path);
  Json warnings = Json::array();
  if (corpus.texts.size() != model.provenance.line_count) {
    warnings.push_back("corpus has " + std::to_string(corpus.texts.size()) +
                       " utterance lines but the model was fitted on " +
                       std::to_string(model.provenance.line_count));
  }
  const UtteranceMatrix data =
      Vectorize(TokenizeAll(corpus.texts), model.vocabulary, corpus.line_numbers);
  const ReducedPoints points = Project(model.pca, data);

  std::map<UtteranceId, const std::string*> text_of;
  for (std::size_t i = 0; i < corpus.texts.size(); ++i) {
    text_of[corpus.line_numbers[i]] = &corpus.texts[i];
  }
  Json neighbors = Json::array();
  for (const Neighbor& nb : NearestUtterances(points, model.simplex, vertex, m)) {
    neighbors.push_back(
        Json{{"id", nb.id}, {"text", *text_of.at(nb.id)}, {"distance", nb.distance}});
  }
  return Json{{"command", "nearest"},
              {"vertex", vertex},
              {"m", m},
              {"neighbors", std::move(neighbors)},
              {"warnings", std::move(warnings)}};
}

Json CoefficientsReport(const ModelArtifact& model, const std::string& text) {
  const Tokens tokens = NonEmptyTokens(text);
  const Eigen::VectorXd raw = Barycentric(
      model.simplex, ProjectOne(model.pca, FrequencyVector(tokens, model.vocabulary)));
  const Eigen::VectorXd clipped = ClipCoefficients(raw);
  return Json{{"command", "coeffs"},
              {"tokens", tokens},
              {"coefficients", VectorToJson(clipped)},
              {"raw", VectorToJson(raw)},
              {"max_violation", std::max(0.0, -raw.minCoeff())}};
}

TokenSimilarity SimilarityFor(const ModelArtifact& model, const std::string& text) {
  const VertexWordMatrix v = MakeVertexWordMatrix(model.pca, model.simplex);
  return TokenSimilarityMatrix(v, model.vocabulary, NonEmptyTokens(text));
}

Json SimilarityReport(const TokenSimilarity& sim) {
  return Json{{"command", "simmatrix"},
              {"tokens", sim.tokens},
              {"raw", Rows(sim.raw)},
              {"hat", Rows(sim.hat)}};
}

FusionInputs PrepareFusion(const ModelArtifact& model, const std::string& text,
                           const AttendOptions& options) {
  if (options.heads < 1 || options.head_dim < 1 || options.model_dim < 0) {
    throw ValidationError("heads and head-dim must be >= 1");
  }
  FusionInputs in;
  in.tokens = NonEmptyTokens(text);
  const int model_dim =
      options.model_dim > 0 ? options.model_dim : options.heads * options.head_dim;
  in.layer = InitLayer(options.heads, options.head_dim, model_dim,
                       static_cast<int>(model.pca.dim()), options.seed);
  if (options.zero_gates) ZeroGates(in.layer);

  std::vector<std::size_t> ids;
  for (const auto& t : in.tokens) ids.push_back(model.vocabulary.IndexOf(t));
  in.embeddings = ToyEmbeddings(ids, model_dim, options.seed);
  in.coefficients =
      SequenceCoefficients(model.vocabulary, model.pca, model.simplex, in.tokens);
  in.m_hat = SimilarityFor(model, text).hat;
  return in;
}

Json AttendReport(const ModelArtifact& model, const std::string& text,
                  const AttendOptions& options) {
  const FusionInputs in = PrepareFusion(model, text, options);
  const AttentionTrace trace =
      FusedAttention(in.layer, in.embeddings, in.coefficients, in.m_hat);
  Json heads = Json::array();
  for (std::size_t h = 0; h < trace.heads.size(); ++h) {
    const HeadTrace& ht = trace.heads[h];
    Json entry{{"head", h},
               {"lambda_query", VectorToJson(ht.lambda_query)},
               {"lambda_key", VectorToJson(ht.lambda_key)},
               {"fused", Rows(ht.fused)},
               {"row_sums", VectorToJson(ht.fused.rowwise().sum())}};
    if (options.vanilla) {
      entry["vanilla"] = Rows(ht.vanilla);
      entry["max_abs_difference"] = (ht.fused - ht.vanilla).cwiseAbs().maxCoeff();
    }
    heads.push_back(std::move(entry));
  }
  return Json{{"command", "attend"},
              {"embeddings", "toy-random"},
              {"tokens", in.tokens},
              {"seed", options.seed},
              {"heads", in.layer.heads},
              {"head_dim", in.layer.head_dim},
              {"model_dim", in.layer.model_dim},
              {"coefficients", VectorToJson(in.coefficients)},
              {"attention", std::move(heads)}};
}

Json AttributeReport(const ModelArtifact& model, const std::string& text,
                     const AttributeOptions& options) {
  if (options.steps < 1) throw ValidationError("steps must be >= 1");
  if (options.top < 0) throw ValidationError("top must be >= 0");
  const FusionInputs in = PrepareFusion(model, text, options.layer);
  const LinearProbe probe = MakeProbe(in.layer, options.layer.seed);

  Json result{{"command", "attribute"},
              {"embeddings", "toy-random"},
              {"tokens", in.tokens},
              {"steps", options.steps}};
  Json ranked = Json::array();
  if (options.target == AttributionTarget::kVertexCoefficients) {
    const DifferentiableFunction f =
        CoefficientProbe(in.layer, in.embeddings, in.m_hat, probe);
    const Eigen::VectorXd baseline = Eigen::VectorXd::Constant(
        in.coefficients.size(), 1.0 / static_cast<double>(in.coefficients.size()));
    const Eigen::VectorXd attr =
        IntegratedGradients(f, in.coefficients, baseline, options.steps);
    for (const auto& r : ImportantVertices(f, in.coefficients, options.top, options.steps)) {
      ranked.push_back(Json{{"vertex", r.index}, {"attribution", r.attribution}});
    }
    result["target"] = "vertex-coeffs";
    result["baseline"] = "uniform";
    result["attribution_sum"] = attr.sum();
    result["value_difference"] = f.value(in.coefficients) - f.value(baseline);
  } else {
    const DifferentiableFunction f =
        EmbeddingProbe(in.layer, in.coefficients, in.m_hat, probe);
    const Eigen::VectorXd x = FlattenRows(in.embeddings);
    const Eigen::VectorXd baseline = Eigen::VectorXd::Zero(x.size());
    const Eigen::VectorXd attr = IntegratedGradients(f, x, baseline, options.steps);
    const Eigen::VectorXd per_position = PositionAttributions(attr, in.embeddings.rows());
    auto order = RankAttributions(per_position);
    if (static_cast<std::size_t>(options.top) < order.size()) order.resize(options.top);
    for (const auto& r : order) {
      ranked.push_back(Json{{"position", r.index},
                            {"token", in.tokens[static_cast<std::size_t>(r.index)]},
                            {"attribution", r.attribution}});
    }
    result["target"] = "tokens";
    result["baseline"] = "zeros";
    result["attribution_sum"] = attr.sum();
    result["value_difference"] = f.value(x) - f.value(baseline);
  }
  result["ranked"] = std::move(ranked);
  return result;
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convex polytopic features for text corpora"};
  app.require_subcommand(1);

  const std::uint64_t default_seed = DefaultSeed();
  FitOptions fit;
  fit.settings.seed = default_seed;
  std::string model_path, corpus_path, text, format = "json", target = "vertex-coeffs";
  int vertex = -1, k = kDefaultTopWords, m = kDefaultNearest;
  bool all = false;
  AttributeOptions attribute;
  attribute.layer.seed = default_seed;

  auto* fit_cmd = app.add_subcommand("fit", "Fit vocabulary, PCA and simplex");
  fit_cmd->add_option("corpus", fit.corpus, "Corpus file, one utterance per line")
      ->required();
  fit_cmd->add_option("--dim", fit.settings.dim, "Reduced dimension R")->required();
  fit_cmd->add_option("--min-count", fit.settings.min_count, "Vocabulary count cutoff")
      ->capture_default_str();
  fit_cmd->add_option("--slack", fit.settings.slack, "Enclosure slack")
      ->capture_default_str();
  fit_cmd->add_option("--seed", fit.settings.seed, "Seed (default: CPM_SEED or 0)");
  fit_cmd->add_option("--restarts", fit.settings.restarts, "Randomized restarts")
      ->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Model artifact path")->required();
  fit_cmd->add_option("--emit-points", fit.emit_points,
                      "Write reduced points and vertices as JSON");

  auto* top_cmd = app.add_subcommand("topwords", "Top words of simplex vertices");
  top_cmd->add_option("--model", model_path)->required();
  auto* vertex_opt = top_cmd->add_option("--vertex", vertex, "Vertex index");
  auto* all_flag = top_cmd->add_flag("--all", all, "Every vertex");
  vertex_opt->excludes(all_flag);
  top_cmd->add_option("--k", k)->capture_default_str();

  auto* near_cmd = app.add_subcommand("nearest", "Utterances closest to a vertex");
  near_cmd->add_option("--model", model_path)->required();
  near_cmd->add_option("--corpus", corpus_path)->required();
  near_cmd->add_option("--vertex", vertex)->required();
  near_cmd->add_option("-m", m)->capture_default_str();

  auto* coeffs_cmd = app.add_subcommand("coeffs", "Vertex coefficients of a text");
  coeffs_cmd->add_option("--model", model_path)->required();
  coeffs_cmd->add_option("--text", text)->required();

  auto* sim_cmd = app.add_subcommand("simmatrix", "Token similarity matrices");
  sim_cmd->add_option("--model", model_path)->required();
  sim_cmd->add_option("--text", text)->required();
  sim_cmd->add_option("--format", format)
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  AttendOptions& layer = attribute.layer;
  auto add_layer_options = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_path)->required();
    cmd->add_option("--text", text)->required();
    cmd->add_option("--heads", layer.heads)->capture_default_str();
    cmd->add_option("--head-dim", layer.head_dim)->capture_default_str();
    cmd->add_option("--model-dim", layer.model_dim, "Embedding width (default heads*head-dim)");
    cmd->add_option("--seed", layer.seed, "Seed (default: CPM_SEED or 0)");
    cmd->add_flag("--zero-gates", layer.zero_gates, "Zero all gating weights");
  };
  auto* attend_cmd = app.add_subcommand("attend", "Fused attention trace on toy embeddings");
  add_layer_options(attend_cmd);
  attend_cmd->add_flag("--vanilla", layer.vanilla, "Include vanilla attention");
  std::string layer_path;
  attend_cmd->add_option("--dump-layer", layer_path, "Write the layer weights as JSON");

  auto* attr_cmd = app.add_subcommand("attribute", "Integrated-gradients attribution");
  add_layer_options(attr_cmd);
  attr_cmd->add_option("--target", target)
      ->check(CLI::IsMember({"vertex-coeffs", "tokens"}))
      ->capture_default_str();
  attr_cmd->add_option("--steps", attribute.steps)->capture_default_str();
  auto* top_opt = attr_cmd->add_option("--top", attribute.top, "Ranked entries to emit")
                      ->capture_default_str();

  auto fail = [&](ErrorKind kind, const std::string& message) {
    err << Json{{"error", {{"kind", ErrorKindName(kind)}, {"message", message}}}}.dump()
        << "\n";
    return kind == ErrorKind::kIo ? 1 : 2;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(ErrorKind::kValidation, e.what());
  }

  try {
    if (fit_cmd->parsed()) {
      out << RunFit(fit).dump() << "\n";
      return 0;
    }
    const ModelArtifact model = LoadArtifact(model_path);
    if (top_cmd->parsed()) {
      if (!all && vertex_opt->count() == 0) {
        throw ValidationError("one of --vertex or --all is required");
      }
      out << TopWordsReport(model, all ? std::nullopt : std::optional<int>(vertex), k)
                 .dump()
          << "\n";
    } else if (near_cmd->parsed()) {
      const Json report = NearestReport(model, corpus_path, vertex, m);
      for (const auto& w : report["warnings"]) {
        err << "warning: " << w.get<std::string>() << "\n";
      }
      out << report.dump() << "\n";
    } else if (coeffs_cmd->parsed()) {
      out << CoefficientsReport(model, text).dump() << "\n";
    } else if (sim_cmd->parsed()) {
      const TokenSimilarity sim = SimilarityFor(model, text);
      if (format == "csv") {
        WriteSimilarityCsv(sim, out);
      } else {
        out << SimilarityReport(sim).dump() << "\n";
      }
    } else if (attend_cmd->parsed()) {
      out << AttendReport(model, text, layer).dump() << "\n";
      if (!layer_path.empty()) {
        WriteJsonFile(ToJson(PrepareFusion(model, text, layer).layer), layer_path);
      }
    } else if (attr_cmd->parsed()) {
      if (top_opt->count() == 0) {
        attribute.top = std::min<int>(attribute.top,
                                      static_cast<int>(model.simplex.num_vertices()));
      }
      attribute.target = target == "tokens" ? AttributionTarget::kTokens
                                            : AttributionTarget::kVertexCoefficients;
      out << AttributeReport(model, text, attribute).dump() << "\n";
    }
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorKind::kValidation, e.what());
  }
  return 0;
}

}  // namespace cpm
