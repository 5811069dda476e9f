// Enumeration oracle and switch-replay checker. The switching and window
// arithmetic here is written from scratch, independent of the generation
// code it verifies.

#include "kdlab/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdlab {

namespace {

struct Partial {
  double value = 0.0;
  double prob = 0.0;
  uint64_t count = 0;
};

struct StepPlan {
  ProbDist branch;
  double divergence = 0.0;
  bool record_divergence = false;
  bool next_switched = false;
};

class Enumerator {
 public:
  Enumerator(OraclePolicy policy, const TabularLM& teacher, const TabularLM& student,
             std::span<const Token> prompt, const SamplingConfig& student_sampling,
             const SamplingConfig& teacher_sampling, const SwitchConfig& switch_cfg,
             const DivergenceMetric& loss_metric, int max_length)
      : policy_(policy),
        teacher_(teacher),
        student_(student),
        prompt_(prompt),
        student_sampling_(student_sampling),
        teacher_sampling_(teacher_sampling),
        switch_cfg_(switch_cfg),
        loss_metric_(loss_metric),
        max_length_(max_length),
        eos_(teacher.vocab().eos) {}

  // The branch distribution for step i (1-based), given the recorded
  // divergences so far and whether the switch already fired.
  StepPlan plan_step(std::span<const Token> ctx, std::span<const double> window, bool switched,
                     int step) const {
    StepPlan plan;
    plan.next_switched = switched;
    switch (policy_) {
      case OraclePolicy::on_policy:
        plan.branch = sampling_dist(student_.logits_row(ctx), student_sampling_);
        break;
      case OraclePolicy::seqkd:
        plan.branch = sampling_dist(teacher_.logits_row(ctx), teacher_sampling_);
        break;
      case OraclePolicy::adaswitch: {
        if (switched) {
          plan.branch = sampling_dist(teacher_.logits_row(ctx), teacher_sampling_);
          break;
        }
        const auto student_row = student_.logits_row(ctx);
        const auto teacher_row = teacher_.logits_row(ctx);
        plan.divergence = token_divergence(switch_cfg_.metric, softmax(teacher_row, 1.0),
                                           softmax(student_row, 1.0));
        plan.record_divergence = true;
        bool fire = false;
        const int window_length = switch_cfg_.window_length;
        if (step > window_length && static_cast<int>(window.size()) >= window_length) {
          double sum = 0.0;
          for (size_t j = window.size() - static_cast<size_t>(window_length); j < window.size();
               ++j)
            sum += window[j];
          fire = plan.divergence >
                 switch_cfg_.threshold_multiplier * (sum / static_cast<double>(window_length));
        }
        plan.next_switched = fire;
        plan.branch = fire ? sampling_dist(teacher_row, teacher_sampling_)
                           : sampling_dist(student_row, student_sampling_);
        break;
      }
    }
    return plan;
  }

  void walk(TokenSeq& ctx, TokenSeq& y, std::vector<double>& window, bool switched, double prob,
            Partial& acc) const {
    const int step = static_cast<int>(y.size()) + 1;
    const StepPlan plan = plan_step(ctx, window, switched, step);
    if (plan.record_divergence) window.push_back(plan.divergence);
    for (Token t = 0; t < teacher_.vocab().size; ++t) {
      const double pt = plan.branch.p[static_cast<size_t>(t)];
      if (pt <= 0.0) continue;
      descend(plan, t, pt, ctx, y, window, prob, acc);
    }
    if (plan.record_divergence) window.pop_back();
  }

  void descend(const StepPlan& plan, Token t, double pt, TokenSeq& ctx, TokenSeq& y,
               std::vector<double>& window, double prob, Partial& acc) const {
    const double p2 = prob * pt;
    y.push_back(t);
    ctx.push_back(t);
    if (t == eos_ || static_cast<int>(y.size()) >= max_length_) {
      acc.value += p2 * sequence_divergence(loss_metric_, teacher_, student_, prompt_, y);
      acc.prob += p2;
      ++acc.count;
    } else {
      walk(ctx, y, window, plan.next_switched, p2, acc);
    }
    ctx.pop_back();
    y.pop_back();
  }

  ExactDivergence run(bool parallel) const {
    // First step expanded here so subtrees can be distributed over leading
    // tokens and reduced in deterministic token order.
    TokenSeq base_ctx(prompt_.begin(), prompt_.end());
    const StepPlan plan = plan_step(base_ctx, {}, false, 1);
    std::vector<double> base_window;
    if (plan.record_divergence) base_window.push_back(plan.divergence);

    const int32_t vocab_size = teacher_.vocab().size;
    std::vector<Partial> parts(static_cast<size_t>(vocab_size));

    auto subtree = [&](Token t) {
      const double pt = plan.branch.p[static_cast<size_t>(t)];
      if (pt <= 0.0) return;
      TokenSeq ctx = base_ctx;
      TokenSeq y;
      std::vector<double> window = base_window;
      descend(plan, t, pt, ctx, y, window, 1.0, parts[static_cast<size_t>(t)]);
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic)
      for (int32_t t = 0; t < vocab_size; ++t) subtree(t);
    } else {
      for (int32_t t = 0; t < vocab_size; ++t) subtree(t);
    }

    ExactDivergence out;
    for (const Partial& p : parts) {
      out.value += p.value;
      out.total_probability += p.prob;
      out.trace_count += p.count;
    }
    return out;
  }

 private:
  OraclePolicy policy_;
  const TabularLM& teacher_;
  const TabularLM& student_;
  std::span<const Token> prompt_;
  SamplingConfig student_sampling_;
  SamplingConfig teacher_sampling_;
  SwitchConfig switch_cfg_;
  DivergenceMetric loss_metric_;
  int max_length_;
  Token eos_;
};

void check_budget(int32_t vocab_size, int max_length) {
  if (max_length < 1) throw std::invalid_argument("enumeration max_length must be >= 1");
  uint64_t total = 0;
  uint64_t level = 1;
  for (int l = 1; l <= max_length; ++l) {
    level *= static_cast<uint64_t>(vocab_size);
    total += level;
    if (total > EnumerationSpec::kBudget)
      throw std::invalid_argument("enumeration budget exceeded: " + std::to_string(total) +
                                  " sequences (limit " +
                                  std::to_string(EnumerationSpec::kBudget) + ")");
  }
}

ExactDivergence enumerate(OraclePolicy policy, const TabularLM& teacher,
                          const TabularLM& student, std::span<const Token> prompt,
                          const SamplingConfig& student_sampling,
                          const SamplingConfig& teacher_sampling,
                          const SwitchConfig& switch_cfg, const DivergenceMetric& loss_metric,
                          const EnumerationSpec& spec, bool parallel) {
  if (!(teacher.vocab() == student.vocab()))
    throw std::invalid_argument("enumeration requires a shared vocabulary");
  check_budget(teacher.vocab().size, spec.max_length);
  student_sampling.validate();
  teacher_sampling.validate();
  loss_metric.validate();
  Enumerator e(policy, teacher, student, prompt, student_sampling, teacher_sampling, switch_cfg,
               loss_metric, spec.max_length);
  return e.run(parallel);
}

}  // namespace

ExactDivergence exact_expected_sequence_divergence(
    OraclePolicy policy, const TabularLM& teacher, const TabularLM& student,
    std::span<const Token> prompt, const SamplingConfig& student_sampling,
    const SamplingConfig& teacher_sampling, const SwitchConfig& switch_cfg,
    const DivergenceMetric& loss_metric, const EnumerationSpec& spec) {
  return enumerate(policy, teacher, student, prompt, student_sampling, teacher_sampling,
                   switch_cfg, loss_metric, spec, true);
}

ExactDivergence exact_expected_sequence_divergence_serial(
    OraclePolicy policy, const TabularLM& teacher, const TabularLM& student,
    std::span<const Token> prompt, const SamplingConfig& student_sampling,
    const SamplingConfig& teacher_sampling, const SwitchConfig& switch_cfg,
    const DivergenceMetric& loss_metric, const EnumerationSpec& spec) {
  return enumerate(policy, teacher, student, prompt, student_sampling, teacher_sampling,
                   switch_cfg, loss_metric, spec, false);
}

bool replay_switch_check(const GenerationTrace& trace, const SwitchConfig& cfg) {
  const int window_length = cfg.window_length;
  const double multiplier = cfg.threshold_multiplier;
  const auto& d = trace.step_divergences;

  if (trace.sources.size() != trace.tokens.size()) return false;

  // Independent re-scan of the recorded divergences: the first position i
  // (1-based, i > L) whose value exceeds multiplier times the mean of the
  // previous L values is where a switch must have fired.
  int expected_position = 0;
  double expected_threshold = 0.0;
  for (int i = 1; i <= static_cast<int>(d.size()); ++i) {
    if (i <= window_length) continue;
    double sum = 0.0;
    for (int j = i - 1 - window_length; j <= i - 2; ++j) sum += d[static_cast<size_t>(j)];
    const double tau = multiplier * (sum / static_cast<double>(window_length));
    if (d[static_cast<size_t>(i - 1)] > tau) {
      expected_position = i;
      expected_threshold = tau;
      break;
    }
  }

  if (trace.switch_event) {
    const SwitchEvent& ev = *trace.switch_event;
    if (ev.position <= window_length) return false;
    if (expected_position != ev.position) return false;
    // Divergences are recorded up to and including the switch step.
    if (static_cast<int>(d.size()) != ev.position) return false;
    if (ev.divergence_at_switch != d[static_cast<size_t>(ev.position - 1)]) return false;
    if (ev.threshold_at_switch != expected_threshold) return false;
    if (!(ev.divergence_at_switch > ev.threshold_at_switch)) return false;
    if (static_cast<int>(trace.tokens.size()) < ev.position) return false;
    for (size_t j = 0; j < trace.sources.size(); ++j) {
      const bool before_switch = static_cast<int>(j) < ev.position - 1;
      if (before_switch && trace.sources[j] != TokenSource::student) return false;
      if (!before_switch && trace.sources[j] != TokenSource::teacher) return false;
    }
    return true;
  }

  if (expected_position != 0) return false;
  if (d.size() != trace.tokens.size()) return false;
  for (TokenSource s : trace.sources)
    if (s != TokenSource::student) return false;
  return true;
}

}  // namespace kdlab
