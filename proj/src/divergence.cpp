// Divergence metrics in nats with epsilon-clamped logs, so one-hot inputs
// stay finite.

#include "kdlab/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kdlab {

namespace {

// Sum over numerator-positive entries of num * ln(num / max(den, eps)).
double clamped_kl(const std::vector<double>& num, const std::vector<double>& den,
                  double epsilon) {
  double sum = 0.0;
  for (size_t j = 0; j < num.size(); ++j) {
    if (num[j] <= 0.0) continue;
    sum += num[j] * (std::log(num[j]) - std::log(std::max(den[j], epsilon)));
  }
  return sum;
}

}  // namespace

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::forward_kl: return "forward_kl";
    case MetricKind::reverse_kl: return "reverse_kl";
    case MetricKind::jsd: return "jsd";
  }
  throw std::logic_error("unreachable metric kind");
}

MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "forward_kl") return MetricKind::forward_kl;
  if (s == "reverse_kl") return MetricKind::reverse_kl;
  if (s == "jsd") return MetricKind::jsd;
  throw std::invalid_argument("unknown divergence metric: " + s);
}

void DivergenceMetric::validate() const {
  if (!(epsilon > 0.0) || epsilon > 1e-6)
    throw std::invalid_argument("metric.epsilon must lie in (0, 1e-6]");
}

double token_divergence(const DivergenceMetric& metric, const ProbDist& p_t,
                        const ProbDist& p_s) {
  if (p_t.size() != p_s.size())
    throw std::invalid_argument("token_divergence: distribution lengths differ");
  double d = 0.0;
  switch (metric.kind) {
    case MetricKind::forward_kl:
      d = clamped_kl(p_t.p, p_s.p, metric.epsilon);
      break;
    case MetricKind::reverse_kl:
      d = clamped_kl(p_s.p, p_t.p, metric.epsilon);
      break;
    case MetricKind::jsd: {
      std::vector<double> mid(p_t.size());
      for (size_t j = 0; j < mid.size(); ++j) mid[j] = 0.5 * (p_t.p[j] + p_s.p[j]);
      d = 0.5 * clamped_kl(p_t.p, mid, metric.epsilon) +
          0.5 * clamped_kl(p_s.p, mid, metric.epsilon);
      break;
    }
  }
  // The clamp can push a near-zero divergence a hair below zero.
  return std::max(d, 0.0);
}

}  // namespace kdlab
