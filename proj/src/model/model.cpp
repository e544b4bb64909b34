#include "perturbopt/model.hpp"

#include <algorithm>
#include <cmath>

namespace perturbopt {
namespace {

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

ParamSpace::ParamSpace(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size()) {
    throw InvalidArgument("parameter box needs matching nonempty bounds");
  }
  if (!lower_.allFinite() || !upper_.allFinite()) {
    throw InvalidArgument("parameter box must be bounded");
  }
  if (((upper_ - lower_).array() <= 0.0).any()) {
    throw InvalidArgument("parameter box has empty interior");
  }
}

ParamSpace ParamSpace::box(int d, double lo, double hi) {
  if (d < 1) throw InvalidArgument("parameter dimension must be positive");
  return ParamSpace(Vector::Constant(d, lo), Vector::Constant(d, hi));
}

bool ParamSpace::contains(const Vector& w, double tol) const {
  if (w.size() != lower_.size() || !w.allFinite()) return false;
  return ((w - lower_).array() >= -tol).all() && ((upper_ - w).array() >= -tol).all();
}

Vector ParamSpace::project(const Vector& w) const { return w.cwiseMax(lower_).cwiseMin(upper_); }

Vector ParamSpace::sample(Stream& rng) const {
  Vector w(dim());
  for (int j = 0; j < dim(); ++j) w[j] = rng.uniform(lower_[j], upper_[j]);
  return w;
}

double ParamSpace::diameter() const { return (upper_ - lower_).norm(); }

double ParamSpace::enclosing_radius() const { return lower_.cwiseAbs().cwiseMax(upper_.cwiseAbs()).norm(); }

double ParamSpace::volume() const { return (upper_ - lower_).prod(); }

GeneralizedLinearModel::GeneralizedLinearModel(ParamSpace space, double lipschitz_bound)
    : space_(std::move(space)), lipschitz_(lipschitz_bound) {
  if (!(lipschitz_bound >= 0.0) || !std::isfinite(lipschitz_bound)) {
    throw InvalidArgument("Lipschitz bound must be finite and nonnegative");
  }
}

GeneralizedLinearModel GeneralizedLinearModel::for_domain(const DomainSpec& spec,
                                                          ParamSpace space) {
  const int d = spec.feature_dimension();
  if (space.dim() != d) {
    throw DimensionError("domain " + std::string(domain_name(spec.domain)) + " has " +
                         std::to_string(d) + " features, parameter box has " +
                         std::to_string(space.dim()));
  }
  int rows = 1;
  if (spec.domain == Domain::Scheduling) {
    rows = *std::max_element(spec.sizes.begin(), spec.sizes.end());
  } else if (spec.domain == Domain::StoVsp) {
    for (int t : spec.sizes) rows = std::max(rows, vsp_network(t, spec.window).dimension());
  }
  return GeneralizedLinearModel(std::move(space), std::sqrt(double(rows) * d));
}

Vector GeneralizedLinearModel::predict(const Vector& w, const Instance& x) const {
  if (w.size() != dim()) throw DimensionError("parameter has the wrong dimension");
  if (x.features.cols() != dim()) throw DimensionError("feature matrix has the wrong width");
  if (!space_.contains(w)) throw InvalidArgument("parameter lies outside W");
  return x.features * w;
}

void GeneralizedLinearModel::verify(const std::vector<Instance>& xs) const {
  for (const Instance& x : xs) {
    if (x.features.cols() != dim()) throw DimensionError("feature matrix has the wrong width");
    const double op = operator_norm(x.features);
    if (op > lipschitz_ * (1.0 + 1e-12)) {
      throw InvalidArgument("instance " + std::to_string(x.id) + " has ||Phi|| = " +
                            std::to_string(op) + " above L_W = " + std::to_string(lipschitz_));
    }
  }
}

double lipschitz_audit(const GeneralizedLinearModel& model, const std::vector<Instance>& xs,
                       std::size_t trials, Stream& rng) {
  if (trials < 2) throw InvalidArgument("audit needs at least two trials");
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Vector a = model.space().sample(rng);
    const Vector b = model.space().sample(rng);
    const double dw = (a - b).norm();
    if (dw == 0.0) continue;
    for (const Instance& x : xs) {
      worst = std::max(worst, (model.predict(a, x) - model.predict(b, x)).norm() / dw);
    }
  }
  // The operator norm is attained along the top right singular vector.
  for (const Instance& x : xs) {
    if (x.features.size() == 0) continue;
    Eigen::JacobiSVD<Matrix> svd(x.features, Eigen::ComputeThinV);
    if (svd.singularValues()(0) == 0.0) continue;
    const Vector dir = svd.matrixV().col(0);
    const Vector center = 0.5 * (model.space().lower() + model.space().upper());
    const double half = 0.5 * (model.space().upper() - model.space().lower()).minCoeff();
    const Vector a = center + 0.5 * half * dir;
    const Vector b = center - 0.5 * half * dir;
    worst = std::max(worst, (model.predict(a, x) - model.predict(b, x)).norm() / (a - b).norm());
  }
  return worst;
}

}  // namespace perturbopt
