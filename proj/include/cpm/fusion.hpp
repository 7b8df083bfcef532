#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cpm {

// Per-head trainable tensors. Shapes: query/key/value d_model x d,
// context_* (R+1) x d, gate_* d.
struct HeadWeights {
  Eigen::MatrixXd query;
  Eigen::MatrixXd key;
  Eigen::MatrixXd value;
  Eigen::MatrixXd context_query;  // maps coefficients to a query-space row
  Eigen::MatrixXd context_key;
  Eigen::VectorXd gate_query;  // scores Q rows for the query gate
  Eigen::VectorXd gate_key;
};

// Toy single-block self-attention with coefficient-gated queries and keys
// and an additive similarity overlay. No positional terms, residuals or
// normalization.
struct FusionLayer {
  int heads = 0;
  int head_dim = 0;
  int model_dim = 0;
  int num_vertices = 0;  // R+1
  std::uint64_t seed = 0;
  std::vector<HeadWeights> head;
  // Shared across heads: score the context row for each gate.
  Eigen::VectorXd context_gate_query;
  Eigen::VectorXd context_gate_key;

  int output_dim() const { return heads * head_dim; }

  // Visits every trainable tensor in a fixed order as (name, flat storage).
  void ForEachParameter(
      const std::function<void(const std::string&, std::span<double>)>& visit);
};

// Weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
FusionLayer InitLayer(int heads, int head_dim, int model_dim, int reduced_dim,
                      std::uint64_t seed);

// Same shapes, every entry zero.
FusionLayer ZerosLike(const FusionLayer& layer);

// Zeroes all gating tensors (context_*, gate_*, shared context gates) so the
// fused path collapses onto vanilla attention.
void ZeroGates(FusionLayer& layer);

struct HeadTrace {
  Eigen::VectorXd lambda_query;  // n, empty on the vanilla path
  Eigen::VectorXd lambda_key;
  Eigen::MatrixXd fused;    // n x n, empty on the vanilla path
  Eigen::MatrixXd vanilla;  // n x n
  Eigen::MatrixXd output;   // n x d
};

struct AttentionTrace {
  std::vector<HeadTrace> heads;
  Eigen::MatrixXd output;  // n x (H d), heads concatenated
  bool fused = false;
};

// softmax(Q K^T / sqrt(d)) per head.
AttentionTrace VanillaAttention(const FusionLayer& layer, const Eigen::MatrixXd& x);

struct Gates {
  Eigen::VectorXd query;
  Eigen::VectorXd key;
};

// lambda = tanh(Q v + (a U) v_a), the context term broadcast over positions.
Gates ComputeGates(const FusionLayer& layer, int h, const Eigen::MatrixXd& q,
                   const Eigen::MatrixXd& k, const Eigen::VectorXd& coeffs);

// Gated attention: queries and keys are mixed with the coefficient context
// row, and 0.5 (lambda_Q + lambda_K) M_hat is added row-wise on top of the
// softmax. Values are left ungated. The vanilla matrices are filled too.
AttentionTrace FusedAttention(const FusionLayer& layer, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& coeffs,
                              const Eigen::MatrixXd& m_hat);

enum class AttentionPath { kVanilla, kFused };

// Scalar readout: mean over positions of output_i . weights.
struct LinearProbe {
  Eigen::VectorXd weights;  // H d
};

LinearProbe MakeProbe(const FusionLayer& layer, std::uint64_t seed);

double ProbeValue(const FusionLayer& layer, const Eigen::MatrixXd& x,
                  const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& m_hat,
                  const LinearProbe& probe, AttentionPath path);

struct ProbeGradients {
  double value = 0.0;
  FusionLayer params;            // d value / d weight, same layout as the layer
  Eigen::MatrixXd input;         // d value / d x
  Eigen::VectorXd coefficients;  // d value / d coeffs (zero on vanilla path)
};

// Reverse-mode gradients of ProbeValue.
ProbeGradients ProbeBackward(const FusionLayer& layer, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& coeffs,
                             const Eigen::MatrixXd& m_hat, const LinearProbe& probe,
                             AttentionPath path);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_entry;
  long entries_checked = 0;
};

// Central differences over every weight entry plus the input and
// coefficient entries. Relative error is |analytic - numeric| /
// max(|analytic|, |numeric|, 1e-5).
GradCheckReport GradCheck(const FusionLayer& layer, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& m_hat,
                          const LinearProbe& probe, AttentionPath path,
                          double step = 1e-5);

// Embedding rows for token ids from a seeded table; row content depends only
// on (seed, id), not on the other ids.
Eigen::MatrixXd ToyEmbeddings(std::span<const std::size_t> ids, int model_dim,
                              std::uint64_t seed);

}  // namespace cpm
