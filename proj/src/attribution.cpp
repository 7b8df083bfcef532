#include "cpm/attribution.hpp"

#include <algorithm>
#include <numeric>

#include "cpm/error.hpp"

namespace cpm {

Eigen::VectorXd IntegratedGradients(const DifferentiableFunction& f,
                                    const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& baseline, int steps) {
  if (steps < 1) throw ValidationError("steps must be >= 1");
  if (x.size() != baseline.size()) {
    throw ValidationError("input and baseline shapes differ");
  }
  const Eigen::VectorXd path = x - baseline;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(x.size());
  for (int k = 0; k < steps; ++k) {
    const double alpha = (k + 0.5) / steps;
    const Eigen::VectorXd grad = f.gradient(baseline + alpha * path);
    if (grad.size() != x.size()) {
      throw ValidationError("gradient shape does not match the input");
    }
    total += grad;
  }
  return path.cwiseProduct(total) / static_cast<double>(steps);
}

std::vector<RankedAttribution> RankAttributions(const Eigen::VectorXd& attributions) {
  std::vector<RankedAttribution> ranked;
  ranked.reserve(static_cast<std::size_t>(attributions.size()));
  for (Eigen::Index i = 0; i < attributions.size(); ++i) {
    ranked.push_back({i, attributions(i)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedAttribution& a, const RankedAttribution& b) {
                     return a.attribution > b.attribution;
                   });
  return ranked;
}

std::vector<RankedAttribution> ImportantVertices(const DifferentiableFunction& f,
                                                 const Eigen::VectorXd& coeffs, int top,
                                                 int steps) {
  if (top < 0 || top > coeffs.size()) {
    throw ValidationError("top must be in [0, R+1]");
  }
  const Eigen::VectorXd center =
      Eigen::VectorXd::Constant(coeffs.size(), 1.0 / static_cast<double>(coeffs.size()));
  auto ranked = RankAttributions(IntegratedGradients(f, coeffs, center, steps));
  ranked.resize(static_cast<std::size_t>(top));
  return ranked;
}

DifferentiableFunction CoefficientProbe(const FusionLayer& layer, Eigen::MatrixXd x,
                                        Eigen::MatrixXd m_hat, LinearProbe probe) {
  DifferentiableFunction f;
  f.value = [=](const Eigen::VectorXd& a) {
    return ProbeValue(layer, x, a, m_hat, probe, AttentionPath::kFused);
  };
  f.gradient = [=](const Eigen::VectorXd& a) {
    return ProbeBackward(layer, x, a, m_hat, probe, AttentionPath::kFused).coefficients;
  };
  return f;
}

DifferentiableFunction EmbeddingProbe(const FusionLayer& layer, Eigen::VectorXd coeffs,
                                      Eigen::MatrixXd m_hat, LinearProbe probe) {
  const Eigen::Index n = m_hat.rows();
  const Eigen::Index width = layer.model_dim;
  DifferentiableFunction f;
  f.value = [=](const Eigen::VectorXd& flat) {
    return ProbeValue(layer, UnflattenRows(flat, n, width), coeffs, m_hat, probe,
                      AttentionPath::kFused);
  };
  f.gradient = [=](const Eigen::VectorXd& flat) {
    return FlattenRows(ProbeBackward(layer, UnflattenRows(flat, n, width), coeffs, m_hat,
                                     probe, AttentionPath::kFused)
                           .input);
  };
  return f;
}

Eigen::VectorXd FlattenRows(const Eigen::MatrixXd& m) {
  Eigen::VectorXd flat(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    flat.segment(i * m.cols(), m.cols()) = m.row(i).transpose();
  }
  return flat;
}

Eigen::MatrixXd UnflattenRows(const Eigen::VectorXd& v, Eigen::Index rows,
                              Eigen::Index cols) {
  if (v.size() != rows * cols) throw ValidationError("flattened size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    m.row(i) = v.segment(i * cols, cols).transpose();
  }
  return m;
}

Eigen::VectorXd PositionAttributions(const Eigen::VectorXd& flat, Eigen::Index tokens) {
  if (tokens < 1 || flat.size() % tokens != 0) {
    throw ValidationError("attribution size is not a multiple of the token count");
  }
  const Eigen::Index width = flat.size() / tokens;
  Eigen::VectorXd out(tokens);
  for (Eigen::Index i = 0; i < tokens; ++i) out(i) = flat.segment(i * width, width).sum();
  return out;
}

}  // namespace cpm
