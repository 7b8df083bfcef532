#include "cpm/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpm/error.hpp"
#include "cpm/features.hpp"
#include "cpm/rng.hpp"

namespace cpm {
namespace {

void FillUniform(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                 double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  m.resize(rows, cols);
  // Row-major fill order keeps the stream layout independent of storage.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.Uniform(-bound, bound);
}

void FillUniform(Eigen::VectorXd& v, Eigen::Index size, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  v.resize(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = rng.Uniform(-bound, bound);
}

std::span<double> Flat(Eigen::MatrixXd& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

std::span<double> Flat(Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

void CheckInputs(const FusionLayer& layer, const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw ValidationError("attention needs at least one token");
  if (x.cols() != layer.model_dim) {
    throw ValidationError("embedding width " + std::to_string(x.cols()) +
                          " does not match model_dim " +
                          std::to_string(layer.model_dim));
  }
}

void CheckFusedInputs(const FusionLayer& layer, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& m_hat) {
  CheckInputs(layer, x);
  if (coeffs.size() != layer.num_vertices) {
    throw ValidationError("coefficient vector has length " +
                          std::to_string(coeffs.size()) + ", expected " +
                          std::to_string(layer.num_vertices));
  }
  if (m_hat.rows() != x.rows() || m_hat.cols() != x.rows()) {
    throw ValidationError("similarity overlay must be n x n");
  }
  for (Eigen::Index i = 0; i < m_hat.rows(); ++i) {
    if (std::abs(m_hat.row(i).sum() - 1.0) > 1e-6 || m_hat.row(i).minCoeff() < 0.0) {
      throw ValidationError("similarity overlay is not row-stochastic");
    }
  }
}

// Backward of row softmax: dS = P o (dP - rowsum(dP o P)).
Eigen::MatrixXd SoftmaxBackward(const Eigen::MatrixXd& p, const Eigen::MatrixXd& dp) {
  const Eigen::VectorXd inner = (dp.array() * p.array()).rowwise().sum();
  return p.array() * (dp.colwise() - inner).array();
}

// Forward intermediates of one fused head, kept for the backward pass.
struct FusedHeadState {
  Eigen::MatrixXd q, k, v;
  Eigen::VectorXd context_q, context_k;  // U^T a
  Eigen::VectorXd lambda_q, lambda_k;
  Eigen::MatrixXd q_hat, k_hat;
  Eigen::MatrixXd softmax;  // P
  Eigen::MatrixXd fused;    // P + diag(gamma) M_hat
  Eigen::MatrixXd output;
};

FusedHeadState ForwardFusedHead(const FusionLayer& layer, int h,
                                const Eigen::MatrixXd& x, const Eigen::VectorXd& coeffs,
                                const Eigen::MatrixXd& m_hat) {
  const HeadWeights& w = layer.head[static_cast<std::size_t>(h)];
  const double scale = 1.0 / std::sqrt(static_cast<double>(layer.head_dim));
  FusedHeadState s;
  s.q = x * w.query;
  s.k = x * w.key;
  s.v = x * w.value;
  s.context_q = w.context_query.transpose() * coeffs;
  s.context_k = w.context_key.transpose() * coeffs;
  const Gates gates = ComputeGates(layer, h, s.q, s.k, coeffs);
  s.lambda_q = gates.query;
  s.lambda_k = gates.key;
  const Eigen::Index n = x.rows();
  s.q_hat = (Eigen::VectorXd::Ones(n) - s.lambda_q).asDiagonal() * s.q +
            s.lambda_q * s.context_q.transpose();
  s.k_hat = (Eigen::VectorXd::Ones(n) - s.lambda_k).asDiagonal() * s.k +
            s.lambda_k * s.context_k.transpose();
  s.softmax = RowSoftmax(s.q_hat * s.k_hat.transpose() * scale);
  const Eigen::VectorXd gamma = 0.5 * (s.lambda_q + s.lambda_k);
  s.fused = s.softmax + gamma.asDiagonal() * m_hat;
  s.output = s.fused * s.v;
  return s;
}

}  // namespace

void FusionLayer::ForEachParameter(
    const std::function<void(const std::string&, std::span<double>)>& visit) {
  for (std::size_t h = 0; h < head.size(); ++h) {
    const std::string prefix = "head" + std::to_string(h) + ".";
    HeadWeights& w = head[h];
    visit(prefix + "query", Flat(w.query));
    visit(prefix + "key", Flat(w.key));
    visit(prefix + "value", Flat(w.value));
    visit(prefix + "context_query", Flat(w.context_query));
    visit(prefix + "context_key", Flat(w.context_key));
    visit(prefix + "gate_query", Flat(w.gate_query));
    visit(prefix + "gate_key", Flat(w.gate_key));
  }
  visit("context_gate_query", Flat(context_gate_query));
  visit("context_gate_key", Flat(context_gate_key));
}

FusionLayer InitLayer(int heads, int head_dim, int model_dim, int reduced_dim,
                      std::uint64_t seed) {
  if (heads < 1 || head_dim < 1 || model_dim < 1 || reduced_dim < 1) {
    throw ValidationError("layer dimensions must all be >= 1");
  }
  FusionLayer layer;
  layer.heads = heads;
  layer.head_dim = head_dim;
  layer.model_dim = model_dim;
  layer.num_vertices = reduced_dim + 1;
  layer.seed = seed;
  Rng rng(seed);
  layer.head.resize(static_cast<std::size_t>(heads));
  for (HeadWeights& w : layer.head) {
    FillUniform(w.query, model_dim, head_dim, model_dim, rng);
    FillUniform(w.key, model_dim, head_dim, model_dim, rng);
    FillUniform(w.value, model_dim, head_dim, model_dim, rng);
    FillUniform(w.context_query, layer.num_vertices, head_dim, layer.num_vertices, rng);
    FillUniform(w.context_key, layer.num_vertices, head_dim, layer.num_vertices, rng);
    FillUniform(w.gate_query, head_dim, head_dim, rng);
    FillUniform(w.gate_key, head_dim, head_dim, rng);
  }
  FillUniform(layer.context_gate_query, head_dim, head_dim, rng);
  FillUniform(layer.context_gate_key, head_dim, head_dim, rng);
  return layer;
}

FusionLayer ZerosLike(const FusionLayer& layer) {
  FusionLayer zeros = layer;
  zeros.ForEachParameter([](const std::string&, std::span<double> values) {
    std::fill(values.begin(), values.end(), 0.0);
  });
  return zeros;
}

void ZeroGates(FusionLayer& layer) {
  for (HeadWeights& w : layer.head) {
    w.context_query.setZero();
    w.context_key.setZero();
    w.gate_query.setZero();
    w.gate_key.setZero();
  }
  layer.context_gate_query.setZero();
  layer.context_gate_key.setZero();
}

AttentionTrace VanillaAttention(const FusionLayer& layer, const Eigen::MatrixXd& x) {
  CheckInputs(layer, x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(layer.head_dim));
  AttentionTrace trace;
  trace.output.resize(x.rows(), layer.output_dim());
  for (int h = 0; h < layer.heads; ++h) {
    const HeadWeights& w = layer.head[static_cast<std::size_t>(h)];
    const Eigen::MatrixXd q = x * w.query;
    const Eigen::MatrixXd k = x * w.key;
    HeadTrace head;
    head.vanilla = RowSoftmax(q * k.transpose() * scale);
    head.output = head.vanilla * (x * w.value);
    trace.output.middleCols(h * layer.head_dim, layer.head_dim) = head.output;
    trace.heads.push_back(std::move(head));
  }
  return trace;
}

Gates ComputeGates(const FusionLayer& layer, int h, const Eigen::MatrixXd& q,
                   const Eigen::MatrixXd& k, const Eigen::VectorXd& coeffs) {
  if (h < 0 || h >= layer.heads) throw ValidationError("head index out of range");
  if (coeffs.size() != layer.num_vertices) {
    throw ValidationError("coefficient vector length does not match the layer");
  }
  if (q.cols() != layer.head_dim || k.cols() != layer.head_dim || q.rows() != k.rows()) {
    throw ValidationError("query/key shapes do not match the layer");
  }
  const HeadWeights& w = layer.head[static_cast<std::size_t>(h)];
  const double context_q =
      (w.context_query.transpose() * coeffs).dot(layer.context_gate_query);
  const double context_k =
      (w.context_key.transpose() * coeffs).dot(layer.context_gate_key);
  Gates gates;
  gates.query = ((q * w.gate_query).array() + context_q).tanh().matrix();
  gates.key = ((k * w.gate_key).array() + context_k).tanh().matrix();
  return gates;
}

AttentionTrace FusedAttention(const FusionLayer& layer, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& coeffs,
                              const Eigen::MatrixXd& m_hat) {
  CheckFusedInputs(layer, x, coeffs, m_hat);
  const AttentionTrace vanilla = VanillaAttention(layer, x);
  AttentionTrace trace;
  trace.fused = true;
  trace.output.resize(x.rows(), layer.output_dim());
  for (int h = 0; h < layer.heads; ++h) {
    FusedHeadState s = ForwardFusedHead(layer, h, x, coeffs, m_hat);
    HeadTrace head;
    head.lambda_query = std::move(s.lambda_q);
    head.lambda_key = std::move(s.lambda_k);
    head.fused = std::move(s.fused);
    head.vanilla = vanilla.heads[static_cast<std::size_t>(h)].vanilla;
    head.output = std::move(s.output);
    trace.output.middleCols(h * layer.head_dim, layer.head_dim) = head.output;
    trace.heads.push_back(std::move(head));
  }
  return trace;
}

LinearProbe MakeProbe(const FusionLayer& layer, std::uint64_t seed) {
  Rng rng(MixSeed(seed, 0x70726f6265ULL));
  LinearProbe probe;
  probe.weights.resize(layer.output_dim());
  for (Eigen::Index i = 0; i < probe.weights.size(); ++i) {
    probe.weights(i) = rng.Uniform(-1.0, 1.0);
  }
  return probe;
}

double ProbeValue(const FusionLayer& layer, const Eigen::MatrixXd& x,
                  const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& m_hat,
                  const LinearProbe& probe, AttentionPath path) {
  if (probe.weights.size() != layer.output_dim()) {
    throw ValidationError("probe width does not match the layer output");
  }
  const AttentionTrace trace = path == AttentionPath::kFused
                                   ? FusedAttention(layer, x, coeffs, m_hat)
                                   : VanillaAttention(layer, x);
  return (trace.output * probe.weights).mean();
}

ProbeGradients ProbeBackward(const FusionLayer& layer, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& coeffs,
                             const Eigen::MatrixXd& m_hat, const LinearProbe& probe,
                             AttentionPath path) {
  if (path == AttentionPath::kFused) {
    CheckFusedInputs(layer, x, coeffs, m_hat);
  } else {
    CheckInputs(layer, x);
  }
  if (probe.weights.size() != layer.output_dim()) {
    throw ValidationError("probe width does not match the layer output");
  }
  const Eigen::Index n = x.rows();
  const int d = layer.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  ProbeGradients grads;
  grads.params = ZerosLike(layer);
  grads.input = Eigen::MatrixXd::Zero(n, layer.model_dim);
  grads.coefficients = Eigen::VectorXd::Zero(layer.num_vertices);
  Eigen::MatrixXd output(n, layer.output_dim());

  for (int h = 0; h < layer.heads; ++h) {
    const HeadWeights& w = layer.head[static_cast<std::size_t>(h)];
    HeadWeights& gw = grads.params.head[static_cast<std::size_t>(h)];
    // d(mean_i output_i . weights) / d output = (1/n) 1 weights^T.
    const Eigen::RowVectorXd probe_row =
        probe.weights.segment(h * d, d).transpose() / static_cast<double>(n);
    const Eigen::MatrixXd grad_out = Eigen::VectorXd::Ones(n) * probe_row;

    Eigen::MatrixXd dq, dk, dv;
    if (path == AttentionPath::kVanilla) {
      const Eigen::MatrixXd q = x * w.query;
      const Eigen::MatrixXd k = x * w.key;
      const Eigen::MatrixXd v = x * w.value;
      const Eigen::MatrixXd p = RowSoftmax(q * k.transpose() * scale);
      output.middleCols(h * d, d) = p * v;
      dv = p.transpose() * grad_out;
      const Eigen::MatrixXd ds = SoftmaxBackward(p, grad_out * v.transpose());
      dq = ds * k * scale;
      dk = ds.transpose() * q * scale;
    } else {
      const FusedHeadState s = ForwardFusedHead(layer, h, x, coeffs, m_hat);
      output.middleCols(h * d, d) = s.output;
      const Eigen::MatrixXd d_fused = grad_out * s.v.transpose();
      dv = s.fused.transpose() * grad_out;
      // Overlay term: gamma_i multiplies row i of M_hat.
      const Eigen::VectorXd d_gamma = (d_fused.array() * m_hat.array()).rowwise().sum();
      Eigen::VectorXd d_lambda_q = 0.5 * d_gamma;
      Eigen::VectorXd d_lambda_k = 0.5 * d_gamma;
      const Eigen::MatrixXd ds = SoftmaxBackward(s.softmax, d_fused);
      const Eigen::MatrixXd dq_hat = ds * s.k_hat * scale;
      const Eigen::MatrixXd dk_hat = ds.transpose() * s.q_hat * scale;

      // q_hat = (1 - lambda) o q + lambda c^T, per side.
      auto mix_backward = [&](const Eigen::MatrixXd& base, const Eigen::VectorXd& lambda,
                              const Eigen::VectorXd& context, const Eigen::MatrixXd& d_hat,
                              Eigen::VectorXd& d_lambda, Eigen::MatrixXd& d_base,
                              Eigen::VectorXd& d_context) {
        d_base = (Eigen::VectorXd::Ones(n) - lambda).asDiagonal() * d_hat;
        d_lambda += ((context.transpose().replicate(n, 1) - base).array() * d_hat.array())
                        .rowwise()
                        .sum()
                        .matrix();
        d_context = d_hat.transpose() * lambda;
      };
      Eigen::VectorXd d_context_q, d_context_k;
      mix_backward(s.q, s.lambda_q, s.context_q, dq_hat, d_lambda_q, dq, d_context_q);
      mix_backward(s.k, s.lambda_k, s.context_k, dk_hat, d_lambda_k, dk, d_context_k);

      // lambda = tanh(base . gate + context . shared_gate).
      auto gate_backward = [&](const Eigen::MatrixXd& base, const Eigen::VectorXd& lambda,
                               const Eigen::VectorXd& context, const Eigen::VectorXd& gate,
                               const Eigen::VectorXd& shared_gate,
                               const Eigen::VectorXd& d_lambda, Eigen::MatrixXd& d_base,
                               Eigen::VectorXd& d_gate, Eigen::VectorXd& d_context,
                               Eigen::VectorXd& d_shared_gate) {
        const Eigen::VectorXd dz =
            d_lambda.array() * (1.0 - lambda.array().square());
        d_base += dz * gate.transpose();
        d_gate = base.transpose() * dz;
        const double d_scalar = dz.sum();
        d_context += d_scalar * shared_gate;
        d_shared_gate += d_scalar * context;
      };
      gate_backward(s.q, s.lambda_q, s.context_q, w.gate_query,
                    layer.context_gate_query, d_lambda_q, dq, gw.gate_query, d_context_q,
                    grads.params.context_gate_query);
      gate_backward(s.k, s.lambda_k, s.context_k, w.gate_key, layer.context_gate_key,
                    d_lambda_k, dk, gw.gate_key, d_context_k,
                    grads.params.context_gate_key);

      // context = U^T a.
      gw.context_query = coeffs * d_context_q.transpose();
      gw.context_key = coeffs * d_context_k.transpose();
      grads.coefficients += w.context_query * d_context_q + w.context_key * d_context_k;
    }

    gw.query = x.transpose() * dq;
    gw.key = x.transpose() * dk;
    gw.value = x.transpose() * dv;
    grads.input += dq * w.query.transpose() + dk * w.key.transpose() +
                   dv * w.value.transpose();
  }
  grads.value = (output * probe.weights).mean();
  return grads;
}

GradCheckReport GradCheck(const FusionLayer& layer, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& m_hat,
                          const LinearProbe& probe, AttentionPath path, double step) {
  ProbeGradients analytic = ProbeBackward(layer, x, coeffs, m_hat, probe, path);
  GradCheckReport report;
  auto compare = [&](const std::string& name, double a, double numeric) {
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-5});
    const double err = std::abs(a - numeric) / denom;
    ++report.entries_checked;
    if (report.worst_entry.empty() || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_entry = name;
    }
  };

  FusionLayer probe_layer = layer;
  std::vector<std::span<double>> grad_views;
  analytic.params.ForEachParameter(
      [&](const std::string&, std::span<double> g) { grad_views.push_back(g); });
  std::size_t tensor = 0;
  probe_layer.ForEachParameter([&](const std::string& name, std::span<double> values) {
    const std::span<double> g = grad_views[tensor++];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = ProbeValue(probe_layer, x, coeffs, m_hat, probe, path);
      values[i] = saved - step;
      const double down = ProbeValue(probe_layer, x, coeffs, m_hat, probe, path);
      values[i] = saved;
      compare(name + "[" + std::to_string(i) + "]", g[i], (up - down) / (2 * step));
    }
  });

  Eigen::MatrixXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = xp.data()[i];
    xp.data()[i] = saved + step;
    const double up = ProbeValue(layer, xp, coeffs, m_hat, probe, path);
    xp.data()[i] = saved - step;
    const double down = ProbeValue(layer, xp, coeffs, m_hat, probe, path);
    xp.data()[i] = saved;
    compare("input[" + std::to_string(i) + "]", analytic.input.data()[i],
            (up - down) / (2 * step));
  }
  if (path == AttentionPath::kFused) {
    Eigen::VectorXd ap = coeffs;
    for (Eigen::Index i = 0; i < ap.size(); ++i) {
      const double saved = ap(i);
      ap(i) = saved + step;
      const double up = ProbeValue(layer, x, ap, m_hat, probe, path);
      ap(i) = saved - step;
      const double down = ProbeValue(layer, x, ap, m_hat, probe, path);
      ap(i) = saved;
      compare("coefficients[" + std::to_string(i) + "]", analytic.coefficients(i),
              (up - down) / (2 * step));
    }
  }
  return report;
}

Eigen::MatrixXd ToyEmbeddings(std::span<const std::size_t> ids, int model_dim,
                              std::uint64_t seed) {
  if (model_dim < 1) throw ValidationError("model_dim must be >= 1");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ids.size()), model_dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Rng rng(MixSeed(seed, ids[i]));
    for (int j = 0; j < model_dim; ++j) {
      x(static_cast<Eigen::Index>(i), j) = rng.Normal();
    }
  }
  return x;
}

}  // namespace cpm
