// Dataset-level evaluation kernels. These are the data-parallel loops of the
// library: greedy decoding and divergence scoring fan out across examples
// with read-only model access. Each kernel has an OpenMP version and a
// serial reference; both fill per-example slots and reduce in index order,
// so results are bit-identical regardless of thread count.
#pragma once

#include <limits>
#include <span>

#include "kdlab/corpus.hpp"
#include "kdlab/divergence.hpp"
#include "kdlab/model.hpp"

namespace kdlab {

struct EvalResult {
  double accuracy = 0.0;
  double mean_divergence = std::numeric_limits<double>::quiet_NaN();
};

// Greedy rollout from the prompt, up to alpha tokens or EOS.
TokenSeq greedy_decode(const TabularLM& model, std::span<const Token> prompt, int alpha);

// Greedy decoding regardless of any sampling config; accuracy is the
// exact-match fraction, mean divergence is computed against the teacher
// over ground-truth targets (skipped when teacher is null).
EvalResult evaluate_dataset(const TabularLM& model, const TabularLM* teacher,
                            std::span<const Example> dataset, int alpha,
                            const DivergenceMetric& metric);
EvalResult evaluate_dataset_serial(const TabularLM& model, const TabularLM* teacher,
                                   std::span<const Example> dataset, int alpha,
                                   const DivergenceMetric& metric);

// Mean sequence divergence of the student from the teacher over ground-truth
// targets; the validation loss of distillation runs.
double mean_sequence_divergence(const TabularLM& teacher, const TabularLM& student,
                                std::span<const Example> dataset,
                                const DivergenceMetric& metric);
double mean_sequence_divergence_serial(const TabularLM& teacher, const TabularLM& student,
                                       std::span<const Example> dataset,
                                       const DivergenceMetric& metric);

// Mean per-token negative log-likelihood over a dataset.
double mean_nll(const TabularLM& model, std::span<const Example> dataset);
double mean_nll_serial(const TabularLM& model, std::span<const Example> dataset);

}  // namespace kdlab
