// The distillation loop: per example, obtain a target trace from the
// configured policy, take one gradient step on the student, and track
// validation loss and test accuracy at fixed intervals.
#pragma once

#include <cstdint>
#include <vector>

#include "kdlab/adaswitch.hpp"
#include "kdlab/corpus.hpp"
#include "kdlab/model.hpp"
#include "kdlab/policies.hpp"
#include "kdlab/telemetry.hpp"
#include "kdlab/trace.hpp"

namespace kdlab {

struct KDConfig {
  PolicyKind policy;
  SwitchConfig switch_cfg;  // adaswitch only; switch_cfg.alpha is the shared decode limit
  SamplingConfig student_sampling{0.5, 0.5, false};
  SamplingConfig teacher_sampling{0.2, 0.5, false};
  double learning_rate = 0.1;
  int epochs = 3;
  uint64_t seed = 0;
  DivergenceMetric metric;        // loss metric for divergence policies
  int validation_interval = 100;  // steps between checkpoints

  int alpha() const { return switch_cfg.alpha; }
  void validate() const;
};

struct Checkpoint {
  int64_t step = 0;
  TabularLM student;
  double validation_loss = 0.0;
  double accuracy = 0.0;
};

struct StepRecord {
  int64_t step = 0;
  std::string example_id;
  double loss = 0.0;
};

struct DistillResult {
  TabularLM student;  // checkpoint with the lowest validation loss
  std::vector<Checkpoint> checkpoints;
  std::vector<TraceLogEntry> traces;
  std::vector<StepRecord> steps;
  RunReport report;
};

// Iterates epochs x shuffled train examples; one SGD step per example on the
// policy's trace (divergence loss vs the teacher, or NLL for sft/seqkd).
// Validation loss is the mean forward-KL sequence divergence on the
// validation set; accuracy is greedy exact-match on the test set. Returns
// the lowest-validation-loss checkpoint as the final student.
DistillResult distill(const TabularLM& teacher, const TabularLM& student,
                      const std::vector<Example>& train, const std::vector<Example>& valid,
                      const std::vector<Example>& test, const KDConfig& cfg);

struct SftResult {
  TabularLM model;
  std::vector<Checkpoint> checkpoints;  // validation_loss holds mean NLL
};

// Plain NLL fine-tuning; selects the lowest-validation-NLL checkpoint and
// returns it frozen.
SftResult sft_teacher(const TabularLM& teacher, const std::vector<Example>& train,
                      const std::vector<Example>& valid, int epochs, double learning_rate,
                      uint64_t seed, int validation_interval = 100);

// The per-example RNG seed: all policy randomness for one example in one
// epoch flows from (run seed, example id, epoch).
uint64_t per_example_seed(uint64_t run_seed, std::string_view example_id, int epoch);

// One trace from the configured policy; the same dispatch the training loop
// uses, exposed so runs can be replayed example by example.
GenerationTrace build_policy_trace(const KDConfig& cfg, const TabularLM& teacher,
                                   const TabularLM& student, const Example& example,
                                   uint64_t example_seed);

// Deterministic Fisher-Yates shuffle driven by the library RNG.
std::vector<size_t> shuffled_indices(size_t n, Rng rng);

}  // namespace kdlab
