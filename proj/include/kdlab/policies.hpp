// Baseline target-sequence selection strategies. Each one produces the
// GenerationTrace the trainer learns from; they differ in who generates the
// tokens and which loss the trainer pairs them with.
#pragma once

#include <string>

#include "kdlab/corpus.hpp"
#include "kdlab/model.hpp"
#include "kdlab/rng.hpp"
#include "kdlab/trace.hpp"

namespace kdlab {

enum class PolicyName { sft, seqkd, off_policy_kd, on_policy_kd, imitkd, skd, adaswitch };

std::string to_string(PolicyName p);
PolicyName policy_name_from_string(const std::string& s);

struct PolicyKind {
  PolicyName kind = PolicyName::adaswitch;
  double mix_probability = 0.5;  // imitkd only
  double k_skd = 0.5;            // skd only

  void validate() const;
};

// Ground-truth target verbatim; trainer pairs this with NLL loss.
GenerationTrace select_target_sft(const Example& example);

// Teacher rollout (up to alpha tokens or EOS); trainer pairs with NLL loss.
GenerationTrace select_target_seqkd(const TabularLM& teacher, const Example& example,
                                    const SamplingConfig& sampling, int alpha, Rng& rng);

// Ground-truth target verbatim; trainer pairs with divergence loss against
// the teacher (this is what distinguishes it from sft).
GenerationTrace select_target_off_policy(const Example& example);

// Student rollout; every token on-policy.
GenerationTrace select_target_on_policy(const TabularLM& student, const Example& example,
                                        const SamplingConfig& sampling, int alpha, Rng& rng);

// One draw per example from mix_rng picks the ground-truth trace with
// probability mix_probability, else the on-policy trace. The rollout uses
// rollout_rng, so the chosen branch is bit-identical to its pure policy.
GenerationTrace select_target_imitkd(const TabularLM& student, const Example& example,
                                     const SamplingConfig& sampling, int alpha,
                                     double mix_probability, Rng& rollout_rng, Rng& mix_rng);

// Speculative-style supervision: the student proposes each token; proposals
// outside the teacher's top-k_skd nucleus are replaced by a teacher sample.
// Both models are evaluated at every step.
GenerationTrace select_target_skd(const TabularLM& student, const TabularLM& teacher,
                                  const Example& example, const SamplingConfig& student_sampling,
                                  const SamplingConfig& teacher_sampling, int alpha, double k_skd,
                                  Rng& rng);

// True iff token lies within the smallest set of highest-probability tokens
// whose cumulative mass reaches `mass` (ties break toward lower ids).
bool in_top_mass(const ProbDist& dist, double mass, Token token);

}  // namespace kdlab
