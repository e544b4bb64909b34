#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "perturbopt/ksos.hpp"
#include "perturbopt/rng.hpp"

namespace perturbopt {

namespace {

constexpr std::size_t kMcSamples = 1u << 16;

// prod_k (b_k . grad) phi(u) = phi(u) * P(u), where P sums over perfect and
// partial matchings of the direction list: unmatched directions contribute
// b_i . u and matched pairs -b_i . b_j.
double matching_sum(const double* proj, const Matrix& gram, int k, unsigned used) {
  int i = 0;
  while (i < k && (used >> i & 1u)) ++i;
  if (i == k) return 1.0;
  used |= 1u << i;
  double total = proj[i] * matching_sum(proj, gram, k, used);
  for (int j = i + 1; j < k; ++j) {
    if (used >> j & 1u) continue;
    total -= gram(i, j) * matching_sum(proj, gram, k, used | 1u << j);
  }
  return total;
}

// Fixed standard normal draws, one row per sample, shared by every call in
// dimension d.
const RowMatrix& normal_draws(int d) {
  thread_local std::map<int, RowMatrix> cache;
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;
  Stream rng(0, "gaussian-moment", {std::uint64_t(d)});
  RowMatrix u(Eigen::Index(kMcSamples), d);
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    for (int j = 0; j < d; ++j) u(t, j) = rng.gaussian();
  }
  return cache.emplace(d, std::move(u)).first->second;
}

// E|f(U)| for U ~ N(0, I_d): Simpson quadrature when d = 1, fixed-stream
// Monte Carlo otherwise.
double standard_normal_mean(int d, const std::function<double(const Vector&)>& fn) {
  if (d == 1) {
    const int n = 24000;
    const double a = -12.0, h = 24.0 / n;
    double acc = 0.0;
    Vector u(1);
    for (int i = 0; i <= n; ++i) {
      u[0] = a + i * h;
      const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += wgt * fn(u) * std::exp(-0.5 * u[0] * u[0]);
    }
    return acc * h / 3.0 / std::sqrt(2.0 * std::numbers::pi);
  }
  const RowMatrix& draws = normal_draws(d);
  double acc = 0.0;
  for (Eigen::Index t = 0; t < draws.rows(); ++t) acc += fn(draws.row(t).transpose());
  return acc / double(draws.rows());
}

void multi_indices(int d, int order, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (int(cur.size()) == d - 1) {
    cur.push_back(order);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = order; a >= 0; --a) {
    cur.push_back(a);
    multi_indices(d, order - a, cur, out);
    cur.pop_back();
  }
}

}  // namespace

double gaussian_derivative_l1(const Matrix& covariance, int order) {
  const int d = int(covariance.rows());
  if (d < 1 || covariance.cols() != d) throw DimensionError("covariance must be square");
  if (order < 0) throw InvalidArgument("derivative order must be nonnegative");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw InvalidArgument("covariance must be positive definite");
  // x = L u; d/dx_j = sum_i (L^-1)_ij d/du_i.
  const Matrix Linv = llt.matrixL().solve(Matrix::Identity(d, d));
  std::vector<std::vector<int>> idx;
  std::vector<int> cur;
  multi_indices(d, order, cur, idx);
  if (order > 30) throw InvalidArgument("derivative order too large");
  double best = 0.0;
  for (const auto& alpha : idx) {
    Matrix dirs(order, d);  // row r: direction of the r-th derivative
    for (int j = 0, r = 0; j < d; ++j) {
      for (int c = 0; c < alpha[std::size_t(j)]; ++c) dirs.row(r++) = Linv.col(j).transpose();
    }
    const Matrix gram = dirs * dirs.transpose();
    double mean = 0.0;
    if (d == 1) {
      mean = standard_normal_mean(1, [&](const Vector& u) {
        const Vector proj = dirs * u;
        return std::abs(matching_sum(proj.data(), gram, order, 0u));
      });
    } else {
      const RowMatrix proj = normal_draws(d) * dirs.transpose();
      for (Eigen::Index t = 0; t < proj.rows(); ++t) {
        mean += std::abs(matching_sum(proj.row(t).data(), gram, order, 0u));
      }
      mean /= double(proj.rows());
    }
    best = std::max(best, mean);
  }
  return best;
}

SmoothnessBounds glm_smoothness_estimates(const GeneralizedLinearModel& model,
                                          const std::vector<Instance>& instances, double lambda,
                                          double s, double f_sup, SmoothnessBounds fallback) {
  const int d = model.dim();
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (s <= 0.5 * d) throw InvalidArgument("Sobolev smoothness must exceed d/2");
  if (f_sup < 0.0) throw InvalidArgument("|f0|_inf must be nonnegative");
  if (instances.empty()) throw InvalidArgument("at least one instance is required");
  const double st = s - 0.5 * d;
  const int order = int(std::ceil(st));
  const double scale = std::pow(lambda, -st);
  if (f_sup == 0.0) return SmoothnessBounds{};

  double c_sob = 0.0, c_tr = 0.0;
  for (const auto& x : instances) {
    const Matrix& phi = x.features;
    if (phi.cols() != d) throw DimensionError("feature matrix does not match the model");
    Eigen::JacobiSVD<Matrix> svd(phi);
    const auto sv = svd.singularValues();
    if (phi.rows() < d || sv.size() < d || sv[d - 1] <= 1e-10 * sv[0]) {
      fallback.fallback = true;
      return fallback;
    }
    // Z = Phi Z' + Z'' with Z ~ N(0, I / d(x)): Z' = Phi^+ Z.
    const Matrix sigma = (phi.transpose() * phi).inverse() / double(phi.rows());
    c_sob = std::max(c_sob, gaussian_derivative_l1(sigma, order));
    // ||sqrt(N_Sigma)||_H^2 = E (1 + |xi|^2)^s for xi ~ N(0, (4 Sigma)^-1).
    const Matrix prec = (4.0 * sigma).inverse();
    const Matrix L = Eigen::LLT<Matrix>(prec).matrixL();
    double m = 0.0;
    if (d == 1) {
      m = standard_normal_mean(1, [&](const Vector& u) {
        return std::pow(1.0 + (L * u).squaredNorm(), s);
      });
    } else {
      const Vector q = (normal_draws(d) * L.transpose()).rowwise().squaredNorm();
      m = (1.0 + q.array()).pow(s).mean();
    }
    c_tr = std::max(c_tr, m);
  }
  SmoothnessBounds out;
  out.sobolev = f_sup * c_sob * scale;
  out.trace = f_sup * model.space().volume() * c_tr * scale;
  return out;
}

PlantedQuadraticBounds planted_quadratic_bounds(const Vector& a, const ParamSpace& space, double s,
                                                double length_scale) {
  const int d = space.dim();
  if (a.size() != d) throw DimensionError("planted minimizer has the wrong dimension");
  const double nu = s - 0.5 * d;
  if (nu <= 0.0) throw InvalidArgument("Sobolev smoothness must exceed d/2");
  const int per_axis = std::max(3, int(std::floor(std::pow(441.0, 1.0 / d))));
  std::size_t total = 1;
  for (int j = 0; j < d; ++j) total *= std::size_t(per_axis);
  RowMatrix grid(total, d);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t r = i;
    for (int j = 0; j < d; ++j) {
      const double t = double(r % std::size_t(per_axis)) / (per_axis - 1);
      grid(Eigen::Index(i), j) = space.lower()[j] + t * (space.upper()[j] - space.lower()[j]);
      r /= std::size_t(per_axis);
    }
  }
  Matrix K = gram_matrix(grid, nu, length_scale);
  K.diagonal().array() += 1e-9 * K.trace() / double(total);
  Eigen::LDLT<Matrix> ldlt(K);
  PlantedQuadraticBounds out;
  // ||w - a||^2 = sum_j h_j(w)^2 with h_j linear; tr(A) = sum_j ||h_j||_H^2.
  for (int j = 0; j < d; ++j) {
    const Vector h = grid.col(j).array() - a[j];
    out.trace += h.dot(ldlt.solve(h));
  }
  const int order = int(std::ceil(nu));
  double f_max = 0.0, grad_max = 0.0;
  for (int j = 0; j < d; ++j) {
    const double far = std::max(std::abs(space.lower()[j] - a[j]), std::abs(space.upper()[j] - a[j]));
    f_max += far * far;
    grad_max = std::max(grad_max, 2.0 * far);
  }
  out.sobolev = f_max;
  if (order >= 1) out.sobolev = std::max(out.sobolev, grad_max);
  if (order >= 2) out.sobolev = std::max(out.sobolev, 2.0);
  return out;
}

}  // namespace perturbopt
