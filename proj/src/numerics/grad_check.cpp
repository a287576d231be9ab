#include "lecb/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lecb/error.hpp"

namespace lecb::num {

namespace {

double evaluate(const ScalarFn& f) {
  Tape tape;
  const Var loss = f(tape);
  const Tensor& v = loss.value();
  if (v.size() != 1) throw DimensionError("grad_check: f must return a 1x1 tensor");
  if (!std::isfinite(v[0])) throw NumericError("grad_check: f returned a non-finite value");
  return v[0];
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFn& f, const std::vector<Parameter*>& params,
                                  double h) {
  if (!(h >= 1e-6 && h <= 1e-3)) throw ConfigError("grad_check: h must lie in [1e-6, 1e-3]");

  std::vector<Tensor> saved_grads;
  std::vector<bool> saved_trainable;
  for (Parameter* p : params) {
    saved_grads.push_back(p->grad);
    saved_trainable.push_back(p->trainable);
    p->trainable = true;
    p->zero_grad();
  }
  {
    Tape tape;
    const Var loss = f(tape);
    if (loss.value().size() != 1) throw DimensionError("grad_check: f must return a 1x1 tensor");
    if (!std::isfinite(loss.value()[0])) {
      throw NumericError("grad_check: f returned a non-finite value");
    }
    tape.backward(loss);
  }

  GradCheckReport report;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = evaluate(f);
      p->value[i] = orig - h;
      const double down = evaluate(f);
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      ++report.entries;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
        report.worst_index = i;
      }
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k]->grad = saved_grads[k];
    params[k]->trainable = saved_trainable[k];
  }
  return report;
}

}  // namespace lecb::num
