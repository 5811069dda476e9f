// Token-level adaptive switching: the student explores until its next-token
// divergence from the teacher spikes above an adaptive threshold, then the
// teacher generates every remaining token.
#pragma once

#include <span>

#include "kdlab/corpus.hpp"
#include "kdlab/divergence.hpp"
#include "kdlab/model.hpp"
#include "kdlab/rng.hpp"
#include "kdlab/trace.hpp"

namespace kdlab {

struct SwitchConfig {
  int window_length = 10;            // sliding window of recent divergences
  double threshold_multiplier = 3.0; // threshold relative to the window mean
  DivergenceMetric metric;
  int alpha = 32;                    // decoding limit

  void validate() const;
};

// Mean of the most recent window_length values. Callers must guard with
// step > window_length; fewer recorded values is a contract violation.
double sliding_mean(std::span<const double> divergences, int window_length);

// The adaptive switch threshold: multiplier times the window mean.
double switch_threshold(double mean_divergence, double multiplier);

// One generation pass. Per step, before a switch, both models' untruncated
// temperature-1 distributions are evaluated and their divergence recorded;
// once the divergence exceeds the threshold the teacher samples that token
// and all remaining ones, with no further divergence checks.
GenerationTrace adaswitch_generate(const TabularLM& student, const TabularLM& teacher,
                                   const Example& example,
                                   const SamplingConfig& student_sampling,
                                   const SamplingConfig& teacher_sampling,
                                   const SwitchConfig& cfg, Rng& rng);

}  // namespace kdlab
