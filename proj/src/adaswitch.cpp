// The adaptive one-time switch between student exploration and teacher
// guidance during target-sequence generation.

#include "kdlab/adaswitch.hpp"

#include <stdexcept>

namespace kdlab {

void SwitchConfig::validate() const {
  if (window_length < 1) throw std::invalid_argument("switch.window_length must be >= 1");
  if (!(threshold_multiplier > 0.0))
    throw std::invalid_argument("switch.threshold_multiplier must be > 0");
  if (alpha < 1) throw std::invalid_argument("switch.alpha must be >= 1");
  metric.validate();
}

double sliding_mean(std::span<const double> divergences, int window_length) {
  if (window_length < 1) throw std::invalid_argument("window_length must be >= 1");
  if (static_cast<int>(divergences.size()) < window_length)
    throw std::invalid_argument("sliding_mean: fewer recorded divergences than the window length");
  double sum = 0.0;
  for (size_t j = divergences.size() - static_cast<size_t>(window_length);
       j < divergences.size(); ++j)
    sum += divergences[j];
  return sum / static_cast<double>(window_length);
}

double switch_threshold(double mean_divergence, double multiplier) {
  if (mean_divergence < 0.0)
    throw std::invalid_argument("switch_threshold: mean divergence must be >= 0");
  return multiplier * mean_divergence;
}

GenerationTrace adaswitch_generate(const TabularLM& student, const TabularLM& teacher,
                                   const Example& example,
                                   const SamplingConfig& student_sampling,
                                   const SamplingConfig& teacher_sampling,
                                   const SwitchConfig& cfg, Rng& rng) {
  cfg.validate();
  student_sampling.validate();
  teacher_sampling.validate();
  if (!(student.vocab() == teacher.vocab()))
    throw std::invalid_argument("student and teacher must share a vocabulary");

  GenerationTrace trace;
  trace.prompt = example.prompt;
  TokenSeq ctx = example.prompt;
  const Token eos = student.vocab().eos;
  bool switched = false;

  for (int i = 1; i <= cfg.alpha; ++i) {
    Token tok;
    TokenSource source;
    if (switched) {
      const auto teacher_row = teacher.logits_row(ctx);
      ++trace.teacher_forward_calls;
      tok = sample_token(sampling_dist(teacher_row, teacher_sampling), rng);
      source = TokenSource::teacher;
    } else {
      const auto student_row = student.logits_row(ctx);
      ++trace.student_forward_calls;
      const auto teacher_row = teacher.logits_row(ctx);
      ++trace.teacher_forward_calls;
      // The step divergence depends only on the context, so it is computed
      // from the two untruncated temperature-1 distributions before any
      // token is sampled.
      const double d =
          token_divergence(cfg.metric, softmax(teacher_row, 1.0), softmax(student_row, 1.0));
      bool fire = false;
      double tau = 0.0;
      if (i > cfg.window_length) {
        tau = switch_threshold(sliding_mean(trace.step_divergences, cfg.window_length),
                               cfg.threshold_multiplier);
        fire = d > tau;
      }
      if (fire) {
        switched = true;
        trace.switch_event = SwitchEvent{i, d, tau};
        tok = sample_token(sampling_dist(teacher_row, teacher_sampling), rng);
        source = TokenSource::teacher;
      } else {
        tok = sample_token(sampling_dist(student_row, student_sampling), rng);
        source = TokenSource::student;
      }
      // The triggering divergence is recorded too, though never consulted
      // again once the switch has fired.
      trace.step_divergences.push_back(d);
    }
    trace.tokens.push_back(tok);
    trace.sources.push_back(source);
    ctx.push_back(tok);
    if (tok == eos) break;
  }
  return trace;
}

}  // namespace kdlab
