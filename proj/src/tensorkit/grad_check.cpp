#include "deepofdm/tensorkit/grad_check.hpp"

#include <cmath>

namespace deepofdm::tk {

namespace {

struct Evaluation {
  double loss;
  std::vector<std::vector<bool>> pattern;
};

}  // namespace

GradCheckReport grad_check(const std::function<Var<double>()>& forward, const std::vector<Var<double>>& params,
                           const GradCheckOptions& opts) {
  Rng rng(opts.seed);
  Tensor<double> weights;

  auto evaluate = [&](bool with_grad) {
    ReluRecorder::start();
    Var<double> out = forward();
    auto pattern = ReluRecorder::stop();
    if (weights.size() != out.value().size()) {
      weights = Tensor<double>(out.shape());
      for (auto& w : weights.data) w = uniform(rng, -1.0, 1.0);
    }
    Var<double> loss = sum(mul(out, Var<double>::constant(weights)));
    if (with_grad) backward(loss);
    return Evaluation{loss.value().data[0], std::move(pattern)};
  };

  std::vector<Var<double>> trainable;
  std::size_t total = 0;
  for (const auto& p : params) {
    if (!p.requires_grad()) continue;
    trainable.push_back(p);
    total += p.value().size();
  }
  GradCheckReport report;
  if (total == 0) return report;

  for (auto& p : trainable) {
    p.grad() = Tensor<double>(p.shape());
  }
  const Evaluation base = evaluate(true);

  const int wanted = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(opts.samples), total));
  int attempts = 0;
  while (report.checked < wanted && attempts < 20 * wanted) {
    ++attempts;
    std::size_t flat = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(total));
    if (flat >= total) flat = total - 1;
    std::size_t k = 0;
    while (flat >= trainable[k].value().size()) flat -= trainable[k++].value().size();
    auto& p = trainable[k];
    const double original = p.value().data[flat];

    Evaluation plus, minus;
    {
      NoGradGuard guard;
      p.value().data[flat] = original + opts.epsilon;
      plus = evaluate(false);
      p.value().data[flat] = original - opts.epsilon;
      minus = evaluate(false);
      p.value().data[flat] = original;
    }
    if (plus.pattern != base.pattern || minus.pattern != base.pattern) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * opts.epsilon);
    const double analytic = p.grad().data[flat];
    const double rel = std::abs(analytic - numeric) / (std::abs(numeric) + 1e-12);
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.checked;
  }
  return report;
}

GradCheckReport grad_check(Network<double>& net, const Tensor<double>& input, const GradCheckOptions& opts,
                           bool training) {
  const Var<double> x = Var<double>::constant(input);
  return grad_check([&] { return net.forward(x, training); }, net.parameters(), opts);
}

}  // namespace deepofdm::tk
