// Target-sequence selection baselines. Forward-call counters on the
// resulting traces count exactly one increment per logits-row evaluation.

#include "kdlab/policies.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace kdlab {

namespace {

GenerationTrace ground_truth_trace(const Example& example) {
  GenerationTrace trace;
  trace.prompt = example.prompt;
  trace.tokens = example.target;
  trace.sources.assign(example.target.size(), TokenSource::ground_truth);
  return trace;
}

GenerationTrace single_model_rollout(const TabularLM& model, const Example& example,
                                     const SamplingConfig& sampling, int alpha, Rng& rng,
                                     TokenSource source) {
  if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
  sampling.validate();
  GenerationTrace trace;
  trace.prompt = example.prompt;
  TokenSeq ctx = example.prompt;
  uint64_t calls = 0;
  for (int i = 0; i < alpha; ++i) {
    const ProbDist dist = sampling_dist(model.logits_row(ctx), sampling);
    ++calls;
    const Token tok = sample_token(dist, rng);
    trace.tokens.push_back(tok);
    trace.sources.push_back(source);
    ctx.push_back(tok);
    if (tok == model.vocab().eos) break;
  }
  if (source == TokenSource::student)
    trace.student_forward_calls = calls;
  else
    trace.teacher_forward_calls = calls;
  return trace;
}

}  // namespace

std::string to_string(PolicyName p) {
  switch (p) {
    case PolicyName::sft: return "sft";
    case PolicyName::seqkd: return "seqkd";
    case PolicyName::off_policy_kd: return "off_policy_kd";
    case PolicyName::on_policy_kd: return "on_policy_kd";
    case PolicyName::imitkd: return "imitkd";
    case PolicyName::skd: return "skd";
    case PolicyName::adaswitch: return "adaswitch";
  }
  throw std::logic_error("unreachable policy name");
}

PolicyName policy_name_from_string(const std::string& s) {
  if (s == "sft") return PolicyName::sft;
  if (s == "seqkd") return PolicyName::seqkd;
  if (s == "off_policy_kd") return PolicyName::off_policy_kd;
  if (s == "on_policy_kd") return PolicyName::on_policy_kd;
  if (s == "imitkd") return PolicyName::imitkd;
  if (s == "skd") return PolicyName::skd;
  if (s == "adaswitch") return PolicyName::adaswitch;
  throw std::invalid_argument("unknown policy: " + s);
}

void PolicyKind::validate() const {
  if (mix_probability < 0.0 || mix_probability > 1.0)
    throw std::invalid_argument("policy.mix_probability must lie in [0, 1]");
  if (!(k_skd > 0.0) || k_skd > 1.0)
    throw std::invalid_argument("policy.k_skd must lie in (0, 1]");
}

GenerationTrace select_target_sft(const Example& example) { return ground_truth_trace(example); }

GenerationTrace select_target_seqkd(const TabularLM& teacher, const Example& example,
                                    const SamplingConfig& sampling, int alpha, Rng& rng) {
  return single_model_rollout(teacher, example, sampling, alpha, rng, TokenSource::teacher);
}

GenerationTrace select_target_off_policy(const Example& example) {
  return ground_truth_trace(example);
}

GenerationTrace select_target_on_policy(const TabularLM& student, const Example& example,
                                        const SamplingConfig& sampling, int alpha, Rng& rng) {
  return single_model_rollout(student, example, sampling, alpha, rng, TokenSource::student);
}

GenerationTrace select_target_imitkd(const TabularLM& student, const Example& example,
                                     const SamplingConfig& sampling, int alpha,
                                     double mix_probability, Rng& rollout_rng, Rng& mix_rng) {
  if (mix_probability < 0.0 || mix_probability > 1.0)
    throw std::invalid_argument("mix_probability must lie in [0, 1]");
  if (mix_rng.uniform01() < mix_probability) return ground_truth_trace(example);
  return select_target_on_policy(student, example, sampling, alpha, rollout_rng);
}

bool in_top_mass(const ProbDist& dist, double mass, Token token) {
  if (token < 0 || static_cast<size_t>(token) >= dist.size())
    throw std::invalid_argument("token outside distribution support");
  std::vector<size_t> order(dist.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (dist.p[a] != dist.p[b]) return dist.p[a] > dist.p[b];
    return a < b;
  });
  double cum = 0.0;
  for (size_t j : order) {
    if (j == static_cast<size_t>(token)) return true;
    cum += dist.p[j];
    if (cum >= mass) return false;
  }
  return false;
}

GenerationTrace select_target_skd(const TabularLM& student, const TabularLM& teacher,
                                  const Example& example, const SamplingConfig& student_sampling,
                                  const SamplingConfig& teacher_sampling, int alpha, double k_skd,
                                  Rng& rng) {
  if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
  if (!(k_skd > 0.0) || k_skd > 1.0) throw std::invalid_argument("k_skd must lie in (0, 1]");
  student_sampling.validate();
  teacher_sampling.validate();

  // The nucleus test supplies the truncation, so the teacher side runs with
  // its configured temperature but top_p forced to 1.
  SamplingConfig teacher_full = teacher_sampling;
  teacher_full.top_p = 1.0;

  GenerationTrace trace;
  trace.prompt = example.prompt;
  TokenSeq ctx = example.prompt;
  for (int i = 0; i < alpha; ++i) {
    const ProbDist student_dist = sampling_dist(student.logits_row(ctx), student_sampling);
    ++trace.student_forward_calls;
    const Token proposal = sample_token(student_dist, rng);
    const ProbDist teacher_dist = sampling_dist(teacher.logits_row(ctx), teacher_full);
    ++trace.teacher_forward_calls;

    Token kept;
    TokenSource source;
    if (k_skd >= 1.0 || in_top_mass(teacher_dist, k_skd, proposal)) {
      kept = proposal;
      source = TokenSource::student;
    } else {
      kept = sample_token(teacher_dist, rng);
      source = TokenSource::teacher;
    }
    trace.tokens.push_back(kept);
    trace.sources.push_back(source);
    ctx.push_back(kept);
    if (kept == student.vocab().eos) break;
  }
  return trace;
}

}  // namespace kdlab
