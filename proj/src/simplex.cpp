#include "cpm/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cpm/linprog.hpp"
#include "cpm/rng.hpp"

namespace cpm {
namespace {

double Factorial(Eigen::Index r) {
  double f = 1.0;
  for (Eigen::Index i = 2; i <= r; ++i) f *= static_cast<double>(i);
  return f;
}

Eigen::MatrixXd EdgeMatrix(const Eigen::MatrixXd& vertices) {
  const Eigen::Index r = vertices.cols();
  Eigen::MatrixXd edges(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    edges.row(i) = vertices.row(i + 1) - vertices.row(0);
  }
  return edges;
}

Eigen::FullPivLU<Eigen::MatrixXd> AugmentedSystem(const Eigen::MatrixXd& vertices) {
  const Eigen::Index r = vertices.cols();
  if (vertices.rows() != r + 1) {
    throw ValidationError("simplex needs R+1 vertices");
  }
  Eigen::MatrixXd system(r + 1, r + 1);
  system.topRows(r) = vertices.transpose();
  system.row(r).setOnes();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw MathError("degenerate simplex");
  return lu;
}

[[noreturn]] void ThrowDegenerate() {
  throw MathError("points span fewer than R dimensions");
}

// Picks R+1 points greedily, each the farthest from the affine hull of the
// ones already chosen.
Eigen::MatrixXd FarthestPointSimplex(const Eigen::MatrixXd& x, Eigen::Index first) {
  const Eigen::Index n = x.rows();
  const Eigen::Index r = x.cols();
  Eigen::MatrixXd vertices(r + 1, r);
  vertices.row(0) = x.row(first);
  Eigen::MatrixXd directions(r, 0);
  const Eigen::MatrixXd offsets = x.rowwise() - x.row(first);
  for (Eigen::Index step = 1; step <= r; ++step) {
    Eigen::MatrixXd residual = offsets;
    if (directions.cols() > 0) {
      residual -= (offsets * directions) * directions.transpose();
    }
    Eigen::Index pick = 0;
    const double dist = residual.rowwise().norm().maxCoeff(&pick);
    if (dist < 1e-10) ThrowDegenerate();
    vertices.row(step) = x.row(pick);
    directions.conservativeResize(Eigen::NoChange, directions.cols() + 1);
    directions.rightCols(1) = residual.row(pick).transpose() / dist;
  }
  (void)n;
  return vertices;
}

// R+1 distinct random data points, redrawn until affinely independent.
Eigen::MatrixXd RandomPointSimplex(const Eigen::MatrixXd& x, Rng& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index r = x.cols();
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Eigen::Index> picks;
    while (static_cast<Eigen::Index>(picks.size()) < r + 1) {
      const auto k = static_cast<Eigen::Index>(rng.Index(static_cast<std::uint64_t>(n)));
      if (std::find(picks.begin(), picks.end(), k) == picks.end()) picks.push_back(k);
    }
    Eigen::MatrixXd vertices(r + 1, r);
    for (Eigen::Index i = 0; i <= r; ++i) vertices.row(i) = x.row(picks[i]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(EdgeMatrix(vertices));
    if (svd.singularValues()(r - 1) > 1e-6) return vertices;
  }
  return FarthestPointSimplex(x, static_cast<Eigen::Index>(rng.Index(static_cast<std::uint64_t>(n))));
}

// Scales the simplex about its centroid until every point is inside.
void DilateUntilFeasible(Eigen::MatrixXd& vertices, const Eigen::MatrixXd& x) {
  const double share = 1.0 / static_cast<double>(vertices.rows());
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double violation = EnclosureViolation(MakeSimplex(vertices), x);
    if (violation <= 1e-13) return;
    // A coordinate b maps to share + (b - share) / s under dilation by s, so
    // s = 1 + violation / share lifts the worst point onto the boundary.
    const double factor = (1.0 + violation / share) * (1.0 + 1e-12);
    const Eigen::RowVectorXd centroid = vertices.colwise().mean();
    vertices = ((vertices.rowwise() - centroid) * factor).rowwise() + centroid;
  }
}

// Maximizes sum(log y) subject to q_i . y <= 1 for the rows of `q` by a
// log-barrier Newton method, starting from the strictly feasible `y`.
Eigen::VectorXd MaximizeLogProduct(const Eigen::MatrixXd& q, Eigen::VectorXd y) {
  const Eigen::Index n = q.rows();
  auto barrier = [&](const Eigen::VectorXd& v, double weight) {
    const Eigen::VectorXd room = Eigen::VectorXd::Ones(n) - q * v;
    if (room.minCoeff() <= 0.0 || v.minCoeff() <= 0.0) {
      return -std::numeric_limits<double>::infinity();
    }
    return v.array().log().sum() + weight * room.array().log().sum();
  };
  for (double weight = 1.0; weight > 1e-13; weight *= 0.05) {
    for (int step = 0; step < 50; ++step) {
      const Eigen::VectorXd inv_room =
          (Eigen::VectorXd::Ones(n) - q * y).cwiseInverse();
      const Eigen::VectorXd grad =
          y.cwiseInverse() - weight * (q.transpose() * inv_room);
      const Eigen::MatrixXd scaled = inv_room.asDiagonal() * q;
      Eigen::MatrixXd hess = weight * scaled.transpose() * scaled;
      hess.diagonal() += y.cwiseInverse().cwiseAbs2();
      const Eigen::VectorXd delta = hess.llt().solve(grad);
      const double decrement = grad.dot(delta);
      if (!(decrement > 1e-14)) break;
      const double base = barrier(y, weight);
      double t = 1.0;
      while (t > 1e-12 && barrier(y + t * delta, weight) < base + 0.25 * t * decrement) {
        t *= 0.5;
      }
      if (t <= 1e-12) break;
      y += t * delta;
    }
  }
  return y;
}

// Re-places the facet opposite vertex `apex` with every other facet fixed.
// In cone coordinates t = E^-1 (p - apex) the facet is {y . t = 1} and the
// volume is proportional to prod(1 / y_j), so the best facet maximizes
// sum(log y_j) subject to q_i . y <= 1, a concave program. Only points near
// the facet can bind, so it is solved on a working set that grows by the
// violators until every point is inside.
bool RefineFacet(Eigen::MatrixXd& vertices, const Eigen::MatrixXd& x,
                 Eigen::Index apex) {
  const Eigen::Index r = x.cols();
  Eigen::MatrixXd edges(r, r);
  for (Eigen::Index j = 0, c = 0; j <= r; ++j) {
    if (j != apex) edges.col(c++) = (vertices.row(j) - vertices.row(apex)).transpose();
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(edges);
  const Eigen::MatrixXd q =
      lu.solve((x.rowwise() - vertices.row(apex)).transpose()).transpose().cwiseMax(0.0);

  const Eigen::VectorXd load = q.rowwise().sum();
  const double max_load = load.maxCoeff();
  if (!(max_load > 0.0)) return false;
  std::vector<char> chosen(static_cast<std::size_t>(q.rows()), 0);
  std::vector<Eigen::Index> working;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    if (load(i) >= 0.75 * max_load) {
      chosen[i] = 1;
      working.push_back(i);
    }
  }

  Eigen::VectorXd y = Eigen::VectorXd::Ones(r);
  for (int round = 0; round < 100; ++round) {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(working.size()), r);
    for (std::size_t i = 0; i < working.size(); ++i) {
      sub.row(static_cast<Eigen::Index>(i)) = q.row(working[i]);
    }
    const double start_load = (q * y).maxCoeff();
    y = MaximizeLogProduct(sub, y * ((1.0 - 1e-3) / start_load));
    const Eigen::VectorXd reach = q * y;
    bool added = false;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      if (!chosen[i] && reach(i) > 1.0) {
        chosen[i] = 1;
        working.push_back(i);
        added = true;
      }
    }
    if (!added) break;
  }
  // Snap onto the tightest point so the facet touches the data.
  y /= (q * y).maxCoeff();
  const double gain = y.array().log().sum();  // log(old volume / new volume)
  if (!(gain > 1e-12)) return false;
  for (Eigen::Index j = 0, c = 0; j <= r; ++j) {
    if (j == apex) continue;
    vertices.row(j) = vertices.row(apex) + edges.col(c).transpose() / y(c);
    ++c;
  }
  return true;
}

struct RunResult {
  Eigen::MatrixXd vertices;
  int iterations = 0;
  std::vector<double> history;
};

RunResult RunAlternating(Eigen::MatrixXd vertices, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& lp_rows, const MvesConfig& config) {
  const Eigen::Index n = x.rows();
  const Eigen::Index r = x.cols();
  RunResult run;
  run.history.push_back(Volume(vertices));

  Eigen::VectorXd lp_rhs = Eigen::VectorXd::Zero(2 * n);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    // The reference vertex rotates so every facet pair gets moved jointly.
    const Eigen::Index ref = iter % (r + 1);
    std::vector<Eigen::Index> others;
    for (Eigen::Index j = 0; j <= r; ++j) {
      if (j != ref) others.push_back(j);
    }
    Eigen::MatrixXd edges(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
      edges.col(i) = (vertices.row(others[i]) - vertices.row(ref)).transpose();
    }
    Eigen::MatrixXd h = edges.inverse();
    Eigen::VectorXd g = h * vertices.row(ref).transpose();
    // Barycentric coordinates w.r.t. the non-reference vertices.
    Eigen::MatrixXd coords = (x * h.transpose()).rowwise() - g.transpose();

    for (Eigen::Index i = 0; i < r; ++i) {
      const double det = h.determinant();
      // d(det H)/d(row i) is the cofactor row, det(H) * column i of H^-1.
      Eigen::VectorXd objective = Eigen::VectorXd::Zero(r + 1);
      objective.head(r) = det * h.inverse().col(i);
      const double norm = objective.norm();
      if (!(norm > 0.0) || !std::isfinite(norm)) break;
      objective /= norm;

      const Eigen::VectorXd others_sum = coords.rowwise().sum() - coords.col(i);
      lp_rhs.tail(n) = Eigen::VectorXd::Ones(n) - others_sum;
      Eigen::VectorXd start(r + 1);
      start.head(r) = h.row(i).transpose();
      start(r) = g(i);

      const double current = std::abs(objective.dot(start));
      Eigen::VectorXd best = start;
      double best_value = current;
      for (double sign : {1.0, -1.0}) {
        const LpResult lp = MaximizeLp(sign * objective, lp_rows, lp_rhs, start);
        if (lp.status != LpStatus::kOptimal) continue;
        const double value = std::abs(objective.dot(lp.x));
        if (value > best_value) {
          best_value = value;
          best = lp.x;
        }
      }
      h.row(i) = best.head(r).transpose();
      g(i) = best(r);
      coords.col(i) = x * best.head(r) - Eigen::VectorXd::Constant(n, best(r));
    }

    const Eigen::MatrixXd inv = h.inverse();
    const Eigen::VectorXd ref_vertex = inv * g;
    vertices.row(ref) = ref_vertex.transpose();
    for (Eigen::Index i = 0; i < r; ++i) {
      vertices.row(others[i]) = (ref_vertex + inv.col(i)).transpose();
    }
    if (config.refine_facets) {
      for (Eigen::Index k = 0; k <= r; ++k) RefineFacet(vertices, x, k);
    }
    const double next = Volume(vertices);
    run.history.push_back(next);
    run.iterations = iter + 1;
    // Converged once a full turn of reference vertices gains too little.
    const auto size = static_cast<Eigen::Index>(run.history.size());
    if (size > r + 1) {
      const double before = run.history[static_cast<std::size_t>(size - r - 2)];
      if ((before - next) / before < config.relative_tolerance) break;
    }
  }
  run.vertices = std::move(vertices);
  return run;
}

}  // namespace

double Volume(const Eigen::MatrixXd& vertices) {
  const Eigen::Index r = vertices.cols();
  if (r == 0) return 0.0;
  return std::abs(EdgeMatrix(vertices).determinant()) / Factorial(r);
}

double Volume(const Simplex& simplex) { return Volume(simplex.vertices); }

Simplex MakeSimplex(Eigen::MatrixXd vertices, double slack) {
  if (vertices.rows() != vertices.cols() + 1) {
    throw ValidationError("simplex needs R+1 vertices of dimension R");
  }
  Simplex simplex;
  simplex.volume = Volume(vertices);
  simplex.vertices = std::move(vertices);
  simplex.slack = slack;
  return simplex;
}

Eigen::VectorXd Barycentric(const Simplex& simplex, const Eigen::VectorXd& point) {
  if (point.size() != simplex.dim()) {
    throw ValidationError("point dimension does not match simplex");
  }
  const auto lu = AugmentedSystem(simplex.vertices);
  Eigen::VectorXd rhs(point.size() + 1);
  rhs << point, 1.0;
  return lu.solve(rhs);
}

Eigen::MatrixXd BarycentricAll(const Simplex& simplex, const Eigen::MatrixXd& points) {
  if (points.rows() == 0) return Eigen::MatrixXd(0, simplex.num_vertices());
  if (points.cols() != simplex.dim()) {
    throw ValidationError("point dimension does not match simplex");
  }
  const auto lu = AugmentedSystem(simplex.vertices);
  Eigen::MatrixXd rhs(points.cols() + 1, points.rows());
  rhs.topRows(points.cols()) = points.transpose();
  rhs.bottomRows(1).setOnes();
  return lu.solve(rhs).transpose();
}

Eigen::VectorXd ClipCoefficients(const Eigen::VectorXd& raw) {
  Eigen::VectorXd clipped = raw.cwiseMax(0.0);
  const double total = clipped.sum();
  if (total <= 0.0) throw MathError("coefficients vanish after clipping");
  return clipped / total;
}

double EnclosureViolation(const Simplex& simplex, const Eigen::MatrixXd& points) {
  if (points.rows() == 0) return 0.0;
  return std::max(0.0, -BarycentricAll(simplex, points).minCoeff());
}

CompositionCoefficients DecomposeAll(const Simplex& simplex,
                                     const ReducedPoints& points) {
  CompositionCoefficients out;
  out.raw = BarycentricAll(simplex, points.coords);
  out.coeffs.resize(out.raw.rows(), out.raw.cols());
  for (Eigen::Index i = 0; i < out.raw.rows(); ++i) {
    out.coeffs.row(i) = ClipCoefficients(out.raw.row(i).transpose()).transpose();
  }
  out.utterance_ids = points.utterance_ids;
  out.max_violation = out.raw.size() == 0 ? 0.0 : std::max(0.0, -out.raw.minCoeff());
  return out;
}

Simplex FitMves(const Eigen::MatrixXd& points, const MvesConfig& config) {
  const Eigen::Index n = points.rows();
  const Eigen::Index r = points.cols();
  if (r < 1) throw ValidationError("simplex dimension must be >= 1");
  if (config.slack < 0.0) throw ValidationError("slack must be non-negative");
  if (config.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (config.restarts < 0) throw ValidationError("restarts must be >= 0");
  if (n < r + 1) ThrowDegenerate();

  // Work in whitened coordinates scaled to unit radius. Barycentric
  // coordinates are invariant under this affine map, and Euclidean choices
  // made in these coordinates (the farthest-point start) become invariant
  // to any affine transform of the input.
  const Eigen::RowVectorXd center = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - center;
  const Eigen::MatrixXd covariance =
      centered.transpose() * centered / static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) ThrowDegenerate();
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    if (!(ev(0) > 1e-20 * ev(r - 1))) ThrowDegenerate();
  }
  // Row form of L^-1 (p - center).
  Eigen::MatrixXd x =
      llt.matrixL().solve(centered.transpose()).transpose();
  const double scale = x.rowwise().norm().maxCoeff();
  if (!(scale > 0.0) || !std::isfinite(scale)) ThrowDegenerate();
  x /= scale;
  // Maps normalized vertex rows back: v = center + scale * L v~.
  const Eigen::MatrixXd to_input = scale * llt.matrixL().toDenseMatrix();

  // Enclosure rows on z = (h_i, g_i): -(x.h - g) <= 0 and x.h - g <= rho.
  Eigen::MatrixXd lp_rows(2 * n, r + 1);
  lp_rows.topLeftCorner(n, r) = -x;
  lp_rows.topRightCorner(n, 1).setOnes();
  lp_rows.bottomLeftCorner(n, r) = x;
  lp_rows.bottomRightCorner(n, 1).setConstant(-1.0);

  Eigen::Index farthest = 0;
  x.rowwise().squaredNorm().maxCoeff(&farthest);

  RunResult best;
  double best_volume = std::numeric_limits<double>::infinity();
  for (int start = 0; start <= config.restarts; ++start) {
    Eigen::MatrixXd init;
    if (start == 0) {
      init = FarthestPointSimplex(x, farthest);
    } else {
      Rng rng(MixSeed(config.seed, static_cast<std::uint64_t>(start)));
      init = RandomPointSimplex(x, rng);
    }
    DilateUntilFeasible(init, x);
    RunResult run = RunAlternating(std::move(init), x, lp_rows, config);
    const double volume = run.history.back();
    if (volume < best_volume * (1.0 - 1e-12)) {
      best_volume = volume;
      best = std::move(run);
    }
  }

  Eigen::MatrixXd vertices = (best.vertices * to_input.transpose()).rowwise() + center;
  Simplex simplex = MakeSimplex(std::move(vertices), config.slack);
  const double volume_scale = std::abs(to_input.determinant());
  simplex.fit_report.iterations = best.iterations;
  simplex.fit_report.restarts = config.restarts;
  for (double v : best.history) {
    simplex.fit_report.volume_history.push_back(v * volume_scale);
  }
  simplex.fit_report.final_volume = simplex.volume;
  const double violation = EnclosureViolation(simplex, points);
  simplex.fit_report.max_violation = violation;
  if (violation > config.slack) {
    throw FitError("enclosure violation " + std::to_string(violation) +
                       " exceeds slack after " +
                       std::to_string(best.iterations) + " iterations",
                   simplex, violation);
  }
  return simplex;
}

Simplex FitMves(const ReducedPoints& points, const MvesConfig& config) {
  return FitMves(points.coords, config);
}

}  // namespace cpm
