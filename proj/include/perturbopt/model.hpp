#pragma once

// Generalized linear statistical model theta = Phi(x) w over a box W.

#include <cstddef>
#include <vector>

#include "perturbopt/common.hpp"
#include "perturbopt/problems.hpp"
#include "perturbopt/rng.hpp"

namespace perturbopt {

class ParamSpace {
 public:
  ParamSpace(Vector lower, Vector upper);
  /// [lo, hi]^d
  static ParamSpace box(int d, double lo = -1.0, double hi = 1.0);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool contains(const Vector& w, double tol = 0.0) const;
  Vector project(const Vector& w) const;
  Vector sample(Stream& rng) const;
  /// Euclidean diameter of the box.
  double diameter() const;
  /// Smallest R with W inside the centered ball of radius R.
  double enclosing_radius() const;
  double volume() const;

 private:
  Vector lower_;
  Vector upper_;
};

class GeneralizedLinearModel {
 public:
  GeneralizedLinearModel(ParamSpace space, double lipschitz_bound);

  /// Declared L_W is the Frobenius bound sqrt(d(G) d) for feature entries in
  /// [-1, 1], maximized over the partition cells of the domain.
  static GeneralizedLinearModel for_domain(const DomainSpec& spec, ParamSpace space);

  const ParamSpace& space() const { return space_; }
  int dim() const { return space_.dim(); }
  double lipschitz_bound() const { return lipschitz_; }

  /// Phi(x) w. Rejects w outside W.
  Vector predict(const Vector& w, const Instance& x) const;

  /// Throws if some feature matrix has operator norm above L_W or the wrong
  /// column count.
  void verify(const std::vector<Instance>& xs) const;

 private:
  ParamSpace space_;
  double lipschitz_;
};

/// Largest observed ||psi_w(x) - psi_w'(x)|| / ||w - w'|| over random pairs
/// in W and the given instances.
double lipschitz_audit(const GeneralizedLinearModel& model, const std::vector<Instance>& xs,
                       std::size_t trials, Stream& rng);

}  // namespace perturbopt
