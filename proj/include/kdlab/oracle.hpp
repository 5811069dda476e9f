// Brute-force verification backends for small instances: exact expected
// sequence divergence by full trace enumeration, and an independent replay
// checker for the switching logic. The window/threshold math here is
// reimplemented from scratch so the checks are not circular.
#pragma once

#include <cstdint>
#include <span>

#include "kdlab/adaswitch.hpp"
#include "kdlab/divergence.hpp"
#include "kdlab/model.hpp"
#include "kdlab/trace.hpp"

namespace kdlab {

enum class OraclePolicy { on_policy, seqkd, adaswitch };

struct ExactDivergence {
  double value = 0.0;              // sum over traces of P(trace) * seq divergence
  double total_probability = 0.0;  // must come out 1 within 1e-9
  uint64_t trace_count = 0;
};

struct EnumerationSpec {
  int max_length = 4;  // decode limit during enumeration
  // Budget: sum over lengths of vocab^length must stay <= 10^6.
  static constexpr uint64_t kBudget = 1'000'000;
};

// Exact expectation of the sequence divergence under the policy's sampling
// distribution, by enumerating every trace it can emit. switch_cfg is
// consulted for the adaswitch policy only. Throws with the computed count
// when the enumeration budget is exceeded. Parallelized over leading tokens
// with a deterministic reduction order.
ExactDivergence exact_expected_sequence_divergence(
    OraclePolicy policy, const TabularLM& teacher, const TabularLM& student,
    std::span<const Token> prompt, const SamplingConfig& student_sampling,
    const SamplingConfig& teacher_sampling, const SwitchConfig& switch_cfg,
    const DivergenceMetric& loss_metric, const EnumerationSpec& spec);

ExactDivergence exact_expected_sequence_divergence_serial(
    OraclePolicy policy, const TabularLM& teacher, const TabularLM& student,
    std::span<const Token> prompt, const SamplingConfig& student_sampling,
    const SamplingConfig& teacher_sampling, const SwitchConfig& switch_cfg,
    const DivergenceMetric& loss_metric, const EnumerationSpec& spec);

// True iff an independent scan of the recorded step divergences reproduces
// exactly the recorded switch position (or its absence), the guard position,
// the student*teacher* source pattern and the recorded threshold.
bool replay_switch_check(const GenerationTrace& trace, const SwitchConfig& cfg);

}  // namespace kdlab
