#include <algorithm>
#include <cmath>

#include "ocoref/autodiff.h"

namespace ocoref {

double GradCheckReport::max_error() const {
  double worst = 0.0;
  for (const GradCheckEntry& e : entries) {
    worst = std::max(worst, e.max_relative_error);
  }
  return worst;
}

namespace {

double evaluate(const std::function<Var(Tape&)>& builder) {
  Tape tape;
  const double loss = builder(tape).scalar();
  if (!std::isfinite(loss)) {
    throw NumericError("grad_check: non-finite loss " + std::to_string(loss));
  }
  return loss;
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Tape&)>& builder,
                           std::span<Parameter* const> params, double step,
                           double tolerance) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step <= 0");
  for (Parameter* p : params) p->grad = Matrix(p->value.rows(), p->value.cols());
  {
    Tape tape;
    Var loss = builder(tape);
    if (!std::isfinite(loss.scalar())) {
      throw NumericError("grad_check: non-finite loss");
    }
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter* p : params) {
    const Matrix analytic = p->grad;
    GradCheckEntry entry{p->name, 0.0};
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double plus = evaluate(builder);
      p->value[i] = saved - step;
      const double minus = evaluate(builder);
      p->value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) /
                         std::max(1e-8, std::abs(a) + std::abs(numeric));
      entry.max_relative_error = std::max(entry.max_relative_error, err);
    }
    report.entries.push_back(std::move(entry));
  }
  for (Parameter* p : params) p->grad.fill(0.0);
  return report;
}

}  // namespace ocoref
