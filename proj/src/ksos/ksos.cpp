#include "perturbopt/ksos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include "perturbopt/parallel.hpp"
#include "perturbopt/rng.hpp"
#include "perturbopt/simd/kernels.hpp"

namespace perturbopt {

double matern(double r, double nu, double length_scale) {
  if (nu <= 0.0) throw InvalidArgument("Matern smoothness must be positive");
  if (length_scale <= 0.0) throw InvalidArgument("length scale must be positive");
  const double t = r / length_scale;
  if (t == 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-t);
  if (nu == 1.5) {
    const double a = std::sqrt(3.0) * t;
    return (1.0 + a) * std::exp(-a);
  }
  if (nu == 2.5) {
    const double a = std::sqrt(5.0) * t;
    return (1.0 + a + a * a / 3.0) * std::exp(-a);
  }
  const double a = std::sqrt(2.0 * nu) * t;
  if (a > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - nu) / boost::math::tgamma(nu) * std::pow(a, nu) *
         boost::math::cyl_bessel_k(nu, a);
}

double sobolev_kernel(const Vector& w, const Vector& w2, double s, int d, double length_scale) {
  if (w.size() != d || w2.size() != d) throw DimensionError("kernel arguments must have dimension d");
  const double nu = s - 0.5 * d;
  if (nu <= 0.0) throw InvalidArgument("Sobolev smoothness must exceed d/2");
  return matern((w - w2).norm(), nu, length_scale);
}

Matrix gram_matrix(const RowMatrix& points, double nu, double length_scale) {
  const auto M = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  Matrix K(M, M);
  std::vector<double> sq(M);
  const std::span<const double> all(points.data(), M * d);
  for (std::size_t i = 0; i < M; ++i) {
    simd::sqdist_rows(all, d, std::span<const double>(points.data() + i * d, d), sq);
    for (std::size_t j = 0; j < M; ++j) {
      K(Eigen::Index(i), Eigen::Index(j)) = matern(std::sqrt(std::max(sq[j], 0.0)), nu, length_scale);
    }
  }
  // Exact symmetry; the SIMD and scalar paths can differ in the last bit.
  return 0.5 * (K + K.transpose());
}

void KsosConfig::validate(int d) const {
  if (d < 1) throw InvalidArgument("parameter dimension must be positive");
  if (smoothness(d) <= 1.0 + 0.5 * d) throw InvalidArgument("kSoS needs s > 1 + d/2");
  if (M + extra_points.size() < std::size_t(d) + 1) throw InvalidArgument("kSoS needs M >= d + 1");
  if (!(lambda_phi >= 0.0) || !std::isfinite(lambda_phi)) {
    throw InvalidArgument("lambda_phi must be finite and nonnegative");
  }
  if (length_scale < 0.0) throw InvalidArgument("length scale must be nonnegative");
  if (newton.max_outer < 1 || newton.max_inner < 1 || !(newton.mu0 > 0.0) ||
      !(newton.mu_factor > 0.0 && newton.mu_factor < 1.0) || !(newton.tolerance > 0.0)) {
    throw InvalidArgument("invalid Newton settings");
  }
  for (const auto& p : extra_points) {
    if (p.size() != d) throw DimensionError("extra kSoS point has the wrong dimension");
  }
}

double lambda_phi_schedule(std::size_t M, int d, double s, double delta, double cbar) {
  if (M < 2 || d < 1 || !(delta > 0.0 && delta < 1.0) || cbar < 0.0) {
    throw InvalidArgument("invalid lambda_phi schedule arguments");
  }
  const double st = s - 0.5 * d;
  const double e = st / d;
  return cbar * std::pow(double(M), -e) * std::pow(std::log(double(M) / delta), e);
}

namespace {

constexpr double kStallDecrement = 1e-6;

struct DualState {
  Eigen::LLT<Matrix> chol;
  Matrix Q;  // V S^-1 V^T
  bool ok = false;
};

// S = lambda I + V^T diag(alpha) V.
Matrix dual_matrix(const Matrix& V, const Vector& alpha, double lambda) {
  Matrix S = V.transpose() * alpha.asDiagonal() * V;
  S.diagonal().array() += lambda;
  return 0.5 * (S + S.transpose());
}

DualState factor(const Matrix& V, const Vector& alpha, double lambda) {
  DualState st;
  st.chol.compute(dual_matrix(V, alpha, lambda));
  if (st.chol.info() != Eigen::Success) return st;
  const Matrix& L = st.chol.matrixLLT();
  if ((L.diagonal().array() <= 0.0).any() || !L.allFinite()) return st;
  const Matrix W = st.chol.matrixL().solve(V.transpose());
  st.Q = W.transpose() * W;
  st.ok = true;
  return st;
}

double log_det(const Eigen::LLT<Matrix>& chol) {
  return 2.0 * chol.matrixLLT().diagonal().array().log().sum();
}

// Barrier objective f^T alpha - mu log det S; +inf outside the feasible set.
double barrier(const Matrix& V, const Vector& f, const Vector& alpha, double lambda, double mu) {
  Eigen::LLT<Matrix> chol(dual_matrix(V, alpha, lambda));
  if (chol.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const auto diag = chol.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) return std::numeric_limits<double>::infinity();
  return f.dot(alpha) - mu * log_det(chol);
}

Vector solve_psd(const Matrix& H, const Vector& b) {
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  Matrix Hr = H;
  Hr.diagonal().array() += 1e-12 * H.diagonal().maxCoeff();
  return Hr.ldlt().solve(b);
}

}  // namespace

KsosResult ksos_solve(const RowMatrix& points, const Vector& values, const ParamSpace& space,
                      const KsosConfig& cfg) {
  const int d = space.dim();
  cfg.validate(d);
  if (points.cols() != d) throw DimensionError("sampled points have the wrong dimension");
  if (points.rows() != values.size()) throw DimensionError("one value per sampled point");
  if (!values.allFinite()) throw InvalidArgument("surface values must be finite");
  const auto M = points.rows();
  const double nu = cfg.smoothness(d) - 0.5 * d;
  const double ell = cfg.length_scale > 0.0 ? cfg.length_scale : space.diameter() / 4.0;

  Matrix K = gram_matrix(points, nu, ell);
  K.diagonal().array() += 1e-9 * K.trace() / double(M);
  Eigen::LLT<Matrix> kchol(K);
  if (kchol.info() != Eigen::Success || (kchol.matrixLLT().diagonal().array() <= 0.0).any()) {
    throw SolverError("Gram matrix is numerically singular; use a larger length scale or fewer points");
  }
  const Matrix V = kchol.matrixL();  // K = V V^T, row m is phi(w_m) in span coordinates
  const double lam = cfg.lambda_phi;
  // sum(alpha) = 1, so shifting f changes only c_hat. Working relative to the
  // smallest sample keeps mu-sized gradient terms above the rounding of f.
  const double shift = values.minCoeff();
  const Vector f = values.array() - shift;

  KsosResult res;
  res.sampled_points = points;
  res.sampled_values = values;
  Vector alpha = Vector::Constant(M, 1.0 / double(M));
  const Vector ones = Vector::Ones(M);
  double mu = cfg.newton.mu0;
  DualState st = factor(V, alpha, lam);
  if (!st.ok) throw SolverError("initial dual point is infeasible");

  Vector g(M);
  bool have_kept = false;
  Vector kept_alpha;
  double kept_mu = mu;
  for (int outer = 0; outer < cfg.newton.max_outer; ++outer) {
    NewtonTraceEntry entry;
    entry.mu = mu;
    bool inner_converged = false;
    double prev_dec2 = std::numeric_limits<double>::infinity();
    for (int inner = 0; inner < cfg.newton.max_inner; ++inner) {
      g = f - mu * st.Q.diagonal();
      const Matrix H = mu * st.Q.cwiseProduct(st.Q);
      const Vector x = solve_psd(H, -g);
      const Vector y = solve_psd(H, ones);
      Vector step = x - (x.sum() / y.sum()) * y;
      step.array() -= step.sum() / double(M);  // keep sum(alpha) = 1 exactly
      const double dec2 = std::max(step.dot(H * step), 0.0) / mu;
      entry.decrement = std::sqrt(dec2);
      ++res.newton_iterations;
      entry.inner_iterations = inner + 1;
      // Below kStallDecrement Newton should converge quadratically; a
      // decrement that no longer shrinks has hit the rounding floor.
      if (dec2 < cfg.newton.tolerance || (dec2 < kStallDecrement && dec2 > 0.1 * prev_dec2)) {
        inner_converged = true;
        break;
      }
      prev_dec2 = dec2;
      double t = entry.decrement > 0.25 ? 1.0 / (1.0 + entry.decrement) : 1.0;
      const double f0 = barrier(V, f, alpha, lam, mu);
      while (t > 1e-12 && !(barrier(V, f, alpha + t * step, lam, mu) <= f0 + 1e-14 * std::abs(f0))) {
        t *= 0.5;
      }
      if (t <= 1e-12) {
        // No representable decrease left: stationary up to rounding when the
        // decrement is already small.
        inner_converged = dec2 < kStallDecrement;
        break;
      }
      alpha += t * step;
      st = factor(V, alpha, lam);
      if (!st.ok) throw SolverError("Newton step left the feasible set");
    }
    if (!inner_converged) {
      res.converged = false;
      entry.c_hat = shift + (f - mu * st.Q.diagonal()).mean();
      res.trace.push_back(entry);
      if (have_kept) {
        // Fall back to the last barrier stage that converged.
        alpha = kept_alpha;
        mu = kept_mu;
        st = factor(V, alpha, lam);
        g = f - mu * st.Q.diagonal();
        break;
      }
    } else {
      have_kept = true;
      kept_alpha = alpha;
      kept_mu = mu;
    }
    g = f - mu * st.Q.diagonal();
    entry.c_hat = shift + g.mean();
    if (inner_converged) res.trace.push_back(entry);
    if (mu * double(M) < cfg.newton.mu_stop) break;
    if (outer + 1 == cfg.newton.max_outer) res.converged = false;
    mu *= cfg.newton.mu_factor;
  }
  if (!res.converged) res.warnings.push_back("Newton iterations did not converge; best iterate returned");

  res.alpha = alpha;
  res.c_hat = shift + g.mean();
  res.constraint_residual = (g.array() - g.mean()).abs().maxCoeff();

  // A = mu S^-1 in span coordinates; B = V^-T A V^-1 so that A = Phi B Phi^T.
  const Matrix A = mu * st.chol.solve(Matrix::Identity(M, M));
  res.trace_BK = A.trace();
  res.trace_term = lam * res.trace_BK;
  const auto U = V.triangularView<Eigen::Lower>();
  Matrix tmp = U.transpose().solve(A);                                       // V^-T A
  res.B = U.transpose().solve(tmp.transpose()).transpose();                  // (V^-T A) V^-1
  res.B = 0.5 * (res.B + res.B.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(A, Eigen::EigenvaluesOnly);
  res.min_eigenvalue_B = eig.eigenvalues().minCoeff();

  const Vector pos = alpha.cwiseMax(0.0);
  const double total = alpha.cwiseAbs().sum();
  res.negative_mass = total > 0.0 ? (total - pos.sum()) / total : 0.0;
  if (res.negative_mass > 0.05) {
    res.warnings.push_back("negative multipliers carry " + std::to_string(res.negative_mass) +
                           " of the mass");
  }
  // Signed combination of the multipliers first; the renormalized positive
  // part is kept as a second candidate for ksos_minimize to compare.
  Vector w = points.transpose() * alpha;
  if (!space.contains(w, 1e-12)) res.warnings.push_back("candidate projected onto W");
  res.w_hat = space.project(w);
  if (pos.sum() > 0.0) {
    res.w_positive = space.project(points.transpose() * pos / pos.sum());
  } else {
    Eigen::Index best;
    values.minCoeff(&best);
    res.w_positive = points.row(best).transpose();
  }
  return res;
}

KsosResult ksos_minimize(const Surface& surface, const ParamSpace& space, const KsosConfig& cfg) {
  const int d = space.dim();
  cfg.validate(d);
  const auto total = cfg.M + cfg.extra_points.size();
  RowMatrix points(total, d);
  for (std::size_t m = 0; m < cfg.M; ++m) {
    Stream rng(cfg.seed, "ksos/sample", {m});
    points.row(Eigen::Index(m)) = space.sample(rng).transpose();
  }
  for (std::size_t e = 0; e < cfg.extra_points.size(); ++e) {
    points.row(Eigen::Index(cfg.M + e)) = cfg.extra_points[e].transpose();
  }
  Vector values(total);
  parallel_for(total, [&](std::size_t m) {
    values[Eigen::Index(m)] = surface(points.row(Eigen::Index(m)).transpose());
  });
  KsosResult res = ksos_solve(points, values, space, cfg);
  res.value_at_w_hat = surface(res.w_hat);
  const double alt = surface(res.w_positive);
  if (alt < res.value_at_w_hat) {
    std::swap(res.w_hat, res.w_positive);
    res.value_at_w_hat = alt;
  }
  res.aposteriori_gap = res.value_at_w_hat - res.c_hat;
  if (res.aposteriori_gap < 0.0) {
    res.warnings.push_back("c_hat exceeds the surface value at w_hat; the samples miss the minimizer basin");
  }
  return res;
}

double certificate(const KsosResult& result, double trace_bound, double sobolev_bound,
                   double lambda_phi) {
  if (trace_bound < 0.0 || sobolev_bound < 0.0 || lambda_phi < 0.0) {
    throw InvalidArgument("certificate inputs must be nonnegative");
  }
  return result.aposteriori_gap + lambda_phi * (trace_bound + sobolev_bound);
}

nlohmann::json to_json(const KsosResult& r) {
  using nlohmann::json;
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json points = json::array();
  for (Eigen::Index i = 0; i < r.sampled_points.rows(); ++i) {
    points.push_back(vec(r.sampled_points.row(i).transpose()));
  }
  json trace = json::array();
  for (const auto& e : r.trace) {
    trace.push_back({{"mu", e.mu}, {"inner_iterations", e.inner_iterations},
                     {"decrement", e.decrement}, {"c_hat", e.c_hat}});
  }
  return json{{"w_hat", vec(r.w_hat)},
              {"c_hat", r.c_hat},
              {"value_at_w_hat", r.value_at_w_hat},
              {"aposteriori_gap", r.aposteriori_gap},
              {"trace_term", r.trace_term},
              {"trace_BK", r.trace_BK},
              {"constraint_residual", r.constraint_residual},
              {"negative_mass", r.negative_mass},
              {"min_eigenvalue_B", r.min_eigenvalue_B},
              {"converged", r.converged},
              {"newton_iterations", r.newton_iterations},
              {"alpha", vec(r.alpha)},
              {"sampled_points", points},
              {"sampled_values", vec(r.sampled_values)},
              {"convergence", trace},
              {"warnings", r.warnings}};
}

}  // namespace perturbopt
