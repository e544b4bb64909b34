#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <limits>
#include <memory>

#include "perturbopt/ksos.hpp"
#include "perturbopt/rng.hpp"

namespace perturbopt {

const char* baseline_name(BaselineMethod m) {
  return m == BaselineMethod::RandomSearch ? "random_search" : "nelder_mead";
}

BaselineMethod parse_baseline(const std::string& name) {
  if (name == "random_search" || name == "RandomSearch") return BaselineMethod::RandomSearch;
  if (name == "nelder_mead" || name == "NelderMead") return BaselineMethod::NelderMead;
  throw InvalidArgument("unknown baseline method: " + name);
}

namespace {

struct Tracker {
  const Surface* surface;
  const ParamSpace* space;
  std::size_t evaluations = 0;
  BaselineResult best;

  double eval(const Vector& raw) {
    const Vector w = space->project(raw);
    const double v = (*surface)(w);
    ++evaluations;
    if (evaluations == 1 || v < best.value) {
      best.value = v;
      best.w = w;
    }
    return v;
  }
};

double gsl_objective(const gsl_vector* x, void* params) {
  auto* tr = static_cast<Tracker*>(params);
  Vector w(static_cast<Eigen::Index>(x->size));
  for (std::size_t i = 0; i < x->size; ++i) w[Eigen::Index(i)] = gsl_vector_get(x, i);
  return tr->eval(w);
}

struct GslFree {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

}  // namespace

BaselineResult baseline_minimize(const Surface& surface, const ParamSpace& space,
                                 BaselineMethod method, std::size_t budget, std::uint64_t seed) {
  if (budget < 1) throw InvalidArgument("baseline budget must be at least 1");
  Tracker tr{&surface, &space, 0, {}};
  const int d = space.dim();

  if (method == BaselineMethod::RandomSearch) {
    for (std::size_t i = 0; i < budget; ++i) {
      Stream rng(seed, "baseline/random", {i});
      tr.eval(space.sample(rng));
    }
  } else {
    gsl_set_error_handler_off();
    constexpr std::size_t kRestarts = 5;
    for (std::size_t r = 0; r < kRestarts && tr.evaluations < budget; ++r) {
      const std::size_t stop = tr.evaluations + std::max<std::size_t>(1, (budget - tr.evaluations) / (kRestarts - r));
      Stream rng(seed, "baseline/start", {r});
      const Vector start = space.sample(rng);
      if (stop - tr.evaluations <= std::size_t(d) + 1) {
        tr.eval(start);
        continue;
      }
      std::unique_ptr<gsl_vector, GslFree> x(gsl_vector_alloc(std::size_t(d)));
      std::unique_ptr<gsl_vector, GslFree> step(gsl_vector_alloc(std::size_t(d)));
      for (int j = 0; j < d; ++j) {
        gsl_vector_set(x.get(), std::size_t(j), start[j]);
        gsl_vector_set(step.get(), std::size_t(j), 0.25 * (space.upper()[j] - space.lower()[j]));
      }
      std::unique_ptr<gsl_multimin_fminimizer, GslFree> mini(
          gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, std::size_t(d)));
      gsl_multimin_function fn{&gsl_objective, std::size_t(d), &tr};
      gsl_multimin_fminimizer_set(mini.get(), &fn, x.get(), step.get());
      while (tr.evaluations < stop) {
        if (gsl_multimin_fminimizer_iterate(mini.get()) != GSL_SUCCESS) break;
        if (gsl_multimin_fminimizer_size(mini.get()) < 1e-10) break;
      }
    }
  }
  tr.best.evaluations = tr.evaluations;
  return tr.best;
}

}  // namespace perturbopt
