// Distillation and supervised fine-tuning loops. Training is sequential
// (one SGD step per example); validation and test passes fan out through the
// parallel evaluation kernels with read-only model access.

#include "kdlab/trainer.hpp"

#include <cassert>
#include <limits>
#include <stdexcept>

#include "kdlab/eval.hpp"

namespace kdlab {

namespace {

constexpr DivergenceMetric kValidationMetric{MetricKind::forward_kl, 1e-12};

bool uses_nll_loss(PolicyName p) { return p == PolicyName::sft || p == PolicyName::seqkd; }

}  // namespace

void KDConfig::validate() const {
  policy.validate();
  switch_cfg.validate();
  student_sampling.validate();
  teacher_sampling.validate();
  metric.validate();
  if (!(learning_rate > 0.0)) throw std::invalid_argument("kd.learning_rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("kd.epochs must be >= 1");
  if (validation_interval < 1)
    throw std::invalid_argument("kd.validation_interval must be >= 1");
}

uint64_t per_example_seed(uint64_t run_seed, std::string_view example_id, int epoch) {
  const uint64_t policy_seed = mix_seed(run_seed, fnv1a64("policy"));
  return mix_seed(mix_seed(policy_seed, fnv1a64(example_id)), static_cast<uint64_t>(epoch));
}

std::vector<size_t> shuffled_indices(size_t n, Rng rng) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

GenerationTrace build_policy_trace(const KDConfig& cfg, const TabularLM& teacher,
                                   const TabularLM& student, const Example& example,
                                   uint64_t example_seed) {
  Rng rng(example_seed);
  switch (cfg.policy.kind) {
    case PolicyName::sft:
      return select_target_sft(example);
    case PolicyName::seqkd:
      return select_target_seqkd(teacher, example, cfg.teacher_sampling, cfg.alpha(), rng);
    case PolicyName::off_policy_kd:
      return select_target_off_policy(example);
    case PolicyName::on_policy_kd:
      return select_target_on_policy(student, example, cfg.student_sampling, cfg.alpha(), rng);
    case PolicyName::imitkd: {
      Rng mix_rng(mix_seed(example_seed, fnv1a64("mix")));
      return select_target_imitkd(student, example, cfg.student_sampling, cfg.alpha(),
                                  cfg.policy.mix_probability, rng, mix_rng);
    }
    case PolicyName::skd:
      return select_target_skd(student, teacher, example, cfg.student_sampling,
                               cfg.teacher_sampling, cfg.alpha(), cfg.policy.k_skd, rng);
    case PolicyName::adaswitch:
      return adaswitch_generate(student, teacher, example, cfg.student_sampling,
                                cfg.teacher_sampling, cfg.switch_cfg, rng);
  }
  throw std::logic_error("unreachable policy");
}

DistillResult distill(const TabularLM& teacher, const TabularLM& initial_student,
                      const std::vector<Example>& train, const std::vector<Example>& valid,
                      const std::vector<Example>& test, const KDConfig& cfg) {
  cfg.validate();
  if (train.empty() || valid.empty() || test.empty())
    throw std::invalid_argument("distill: datasets must be nonempty");
  if (!teacher.frozen())
    throw std::invalid_argument("distill: teacher must be fine-tuned and frozen first");
  if (!(teacher.vocab() == initial_student.vocab()))
    throw std::invalid_argument("distill: teacher and student must share a vocabulary");

  const uint64_t teacher_hash = teacher.content_hash();
  TabularLM student = initial_student;

  DistillResult result{student, {}, {}, {}, {}};
  result.traces.reserve(train.size() * static_cast<size_t>(cfg.epochs));
  result.steps.reserve(train.size() * static_cast<size_t>(cfg.epochs));

  auto record_checkpoint = [&](int64_t step) {
    Checkpoint cp{step, student, 0.0, 0.0};
    cp.validation_loss = mean_sequence_divergence(teacher, student, valid, kValidationMetric);
    cp.accuracy = evaluate_dataset(student, nullptr, test, cfg.alpha(), cfg.metric).accuracy;
    result.checkpoints.push_back(std::move(cp));
  };

  record_checkpoint(0);
  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order =
        shuffled_indices(train.size(), substream(cfg.seed, "shuffle", static_cast<uint64_t>(epoch)));
    for (size_t idx : order) {
      const Example& ex = train[idx];
      const GenerationTrace trace =
          build_policy_trace(cfg, teacher, student, ex, per_example_seed(cfg.seed, ex.id, epoch));
      const LossAndGrad lg =
          uses_nll_loss(cfg.policy.kind)
              ? nll_loss_and_gradient(student, ex.prompt, trace.tokens)
              : loss_and_gradient(student, teacher, ex.prompt, trace.tokens, cfg.metric);
      apply_gradient(student, lg.grad, cfg.learning_rate);
      ++step;
      result.steps.push_back(StepRecord{step, ex.id, lg.loss});
      result.traces.push_back(TraceLogEntry{ex.id, step, trace});
      if (step % cfg.validation_interval == 0) record_checkpoint(step);
    }
  }
  if (step % cfg.validation_interval != 0) record_checkpoint(step);

  assert(teacher.content_hash() == teacher_hash);
  (void)teacher_hash;

  const Checkpoint* best = &result.checkpoints.front();
  for (const Checkpoint& cp : result.checkpoints)
    if (cp.validation_loss < best->validation_loss) best = &cp;
  result.student = best->student;

  std::vector<StepLoss> losses;
  losses.reserve(result.steps.size());
  for (const StepRecord& r : result.steps) losses.push_back({r.step, r.loss});
  std::vector<ValidationPoint> points;
  points.reserve(result.checkpoints.size());
  for (const Checkpoint& cp : result.checkpoints)
    points.push_back({cp.step, cp.validation_loss, cp.accuracy});
  result.report = build_report(result.traces, losses, points, cfg.validation_interval);
  return result;
}

SftResult sft_teacher(const TabularLM& teacher, const std::vector<Example>& train,
                      const std::vector<Example>& valid, int epochs, double learning_rate,
                      uint64_t seed, int validation_interval) {
  if (epochs < 0) throw std::invalid_argument("sft epochs must be >= 0");
  if (learning_rate < 0.0) throw std::invalid_argument("sft learning_rate must be >= 0");
  if (train.empty() || valid.empty())
    throw std::invalid_argument("sft_teacher: datasets must be nonempty");
  if (validation_interval < 1) throw std::invalid_argument("validation_interval must be >= 1");

  TabularLM model = teacher;
  SftResult result{model, {}};
  const auto nan = std::numeric_limits<double>::quiet_NaN();

  auto record = [&](int64_t step) {
    result.checkpoints.push_back(Checkpoint{step, model, mean_nll(model, valid), nan});
  };

  record(0);
  int64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order =
        shuffled_indices(train.size(), substream(seed, "sft-shuffle", static_cast<uint64_t>(epoch)));
    for (size_t idx : order) {
      sft_step(model, train[idx], learning_rate);
      ++step;
      if (step % validation_interval == 0) record(step);
    }
  }
  if (step % validation_interval != 0) record(step);

  const Checkpoint* best = &result.checkpoints.front();
  for (const Checkpoint& cp : result.checkpoints)
    if (cp.validation_loss < best->validation_loss) best = &cp;
  result.model = best->student;
  result.model.freeze();
  return result;
}

}  // namespace kdlab
