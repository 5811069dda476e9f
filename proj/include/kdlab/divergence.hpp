// Token-level divergence metrics between next-token distributions:
// forward KL, reverse KL and Jensen-Shannon divergence, all in nats.
#pragma once

#include <string>

#include "kdlab/types.hpp"

namespace kdlab {

enum class MetricKind { forward_kl, reverse_kl, jsd };

std::string to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& s);

struct DivergenceMetric {
  MetricKind kind = MetricKind::forward_kl;
  double epsilon = 1e-12;  // log-smoothing clamp for denominators

  void validate() const;  // epsilon in (0, 1e-6]
};

// d(p_t, p_s) for the configured metric. Zero-probability numerator terms
// contribute 0; denominators are clamped at epsilon. Result is finite and
// >= 0. Throws std::invalid_argument on length mismatch.
double token_divergence(const DivergenceMetric& metric, const ProbDist& p_t,
                        const ProbDist& p_s);

}  // namespace kdlab
