#include "nrg/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nrg/error.hpp"

namespace nrg::tensor {

namespace {

double evaluate(const LossBuilder& build) {
  Tape tape;
  return build(tape).item();
}

}  // namespace

GradCheckReport gradient_check(const LossBuilder& build, const std::vector<NamedTensor>& params,
                               const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("gradient_check: step must be positive");

  const double first = evaluate(build);
  const double second = evaluate(build);
  if (first != second) throw StateError("gradient_check: loss builder is not deterministic");

  for (const auto& p : params) p.tensor->zero_grad();
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  report.passed = true;
  for (const auto& p : params) {
    Tensor& t = *p.tensor;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    ParamCheck check{.name = p.name};
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + options.step;
      const double plus = evaluate(build);
      t[i] = saved - options.step;
      const double minus = evaluate(build);
      t[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > check.max_rel_error || i == 0) {
        check.max_rel_error = std::max(check.max_rel_error, rel);
        check.worst_index = i;
        check.analytic = analytic[i];
        check.numeric = numeric;
      }
    }
    if (check.max_rel_error > options.tolerance) report.passed = false;
    report.params.push_back(std::move(check));
  }
  return report;
}

}  // namespace nrg::tensor
