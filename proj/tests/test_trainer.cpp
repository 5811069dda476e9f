#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "kdlab/eval.hpp"
#include "kdlab/trainer.hpp"
#include "test_support.hpp"

using namespace kdlab;
using testsupport::clone_as_student;

namespace {

DatasetSplits make_data(TaskKind kind, LengthRange prompt_len, uint64_t seed, int n_train = 80,
                        int n_valid = 20, int n_test = 20) {
  TaskSpec spec;
  spec.kind = kind;
  spec.vocab = Vocab::with_size(16);
  spec.prompt_len = prompt_len;
  spec.seed = seed;
  return generate_dataset(spec, n_train, n_valid, n_test);
}

KDConfig make_cfg(PolicyName policy, uint64_t seed, int epochs = 1, int interval = 20) {
  KDConfig cfg;
  cfg.policy.kind = policy;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.validation_interval = interval;
  return cfg;
}

TabularLM make_teacher(const DatasetSplits& data, uint64_t seed, int order = 3) {
  const TabularLM teacher0 =
      TabularLM::random_init(Vocab::with_size(16), order, ModelRole::teacher, seed);
  return sft_teacher(teacher0, data.train, data.valid, 3, 0.5, seed + 1).model;
}

std::string serialize_traces(const DistillResult& run) {
  std::ostringstream os;
  for (const TraceLogEntry& e : run.traces) os << trace_to_json_line(e.id, e.step, e.trace) << '\n';
  return os.str();
}

}  // namespace

TEST_CASE("identical teacher and student is a fixed point of divergence training") {
  const DatasetSplits data = make_data(TaskKind::copy, {1, 2}, 3, 40, 10, 10);
  TabularLM teacher = make_teacher(data, 5);
  const TabularLM student = clone_as_student(teacher);
  const uint64_t before = student.content_hash();

  for (PolicyName policy : {PolicyName::off_policy_kd, PolicyName::on_policy_kd,
                            PolicyName::imitkd, PolicyName::skd, PolicyName::adaswitch}) {
    KDConfig cfg = make_cfg(policy, 7);
    const DistillResult run = distill(teacher, student, data.train, data.valid, data.test, cfg);
    CHECK(run.student.content_hash() == before);
    for (const StepRecord& r : run.steps) CHECK(r.loss == 0.0);
    for (const Checkpoint& cp : run.checkpoints) CHECK(cp.validation_loss == 0.0);
  }
}

TEST_CASE("distillation runs are bit-reproducible") {
  const DatasetSplits data = make_data(TaskKind::copy, {1, 1}, 11);
  const TabularLM teacher = make_teacher(data, 13);
  const TabularLM student =
      TabularLM::random_init(Vocab::with_size(16), 2, ModelRole::student, 17);
  const KDConfig cfg = make_cfg(PolicyName::adaswitch, 19);

  const DistillResult a = distill(teacher, student, data.train, data.valid, data.test, cfg);
  const DistillResult b = distill(teacher, student, data.train, data.valid, data.test, cfg);

  CHECK(a.student.content_hash() == b.student.content_hash());
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (size_t i = 0; i < a.checkpoints.size(); ++i) {
    CHECK(a.checkpoints[i].step == b.checkpoints[i].step);
    CHECK(a.checkpoints[i].student.content_hash() == b.checkpoints[i].student.content_hash());
    CHECK(a.checkpoints[i].validation_loss == b.checkpoints[i].validation_loss);
    CHECK(a.checkpoints[i].accuracy == b.checkpoints[i].accuracy);
  }
  CHECK(serialize_traces(a) == serialize_traces(b));
}

TEST_CASE("the teacher is untouched by distillation") {
  const DatasetSplits data = make_data(TaskKind::modular_sum, {2, 6}, 23);
  const TabularLM teacher = make_teacher(data, 29);
  const uint64_t teacher_hash = teacher.content_hash();
  const TabularLM student =
      TabularLM::random_init(Vocab::with_size(16), 2, ModelRole::student, 31);
  for (PolicyName policy : {PolicyName::sft, PolicyName::on_policy_kd, PolicyName::skd,
                            PolicyName::adaswitch}) {
    const KDConfig cfg = make_cfg(policy, 37);
    distill(teacher, student, data.train, data.valid, data.test, cfg);
    CHECK(teacher.content_hash() == teacher_hash);
  }
}

TEST_CASE("adaswitch with a huge multiplier reproduces the on-policy run") {
  const DatasetSplits data = make_data(TaskKind::modular_sum, {2, 6}, 41);
  const TabularLM teacher = make_teacher(data, 43);
  const TabularLM student =
      TabularLM::random_init(Vocab::with_size(16), 2, ModelRole::student, 47);

  KDConfig ada = make_cfg(PolicyName::adaswitch, 53);
  ada.switch_cfg.threshold_multiplier = 1e18;
  KDConfig on = make_cfg(PolicyName::on_policy_kd, 53);

  const DistillResult ra = distill(teacher, student, data.train, data.valid, data.test, ada);
  const DistillResult ro = distill(teacher, student, data.train, data.valid, data.test, on);

  CHECK(ra.student.content_hash() == ro.student.content_hash());
  REQUIRE(ra.traces.size() == ro.traces.size());
  for (size_t i = 0; i < ra.traces.size(); ++i) {
    CHECK(ra.traces[i].trace.tokens == ro.traces[i].trace.tokens);
    CHECK(ra.traces[i].trace.sources == ro.traces[i].trace.sources);
    CHECK_FALSE(ra.traces[i].trace.switch_event.has_value());
  }
}

TEST_CASE("the selected checkpoint never loses to the initial validation loss") {
  const DatasetSplits data = make_data(TaskKind::copy, {1, 1}, 59, 200, 40, 40);
  const TabularLM teacher = make_teacher(data, 61);
  const TabularLM student =
      TabularLM::random_init(Vocab::with_size(16), 2, ModelRole::student, 67);
  const KDConfig cfg = make_cfg(PolicyName::adaswitch, 71, 2, 50);
  const DistillResult run = distill(teacher, student, data.train, data.valid, data.test, cfg);

  double best = run.checkpoints.front().validation_loss;
  const double initial = best;
  for (const Checkpoint& cp : run.checkpoints) best = std::min(best, cp.validation_loss);
  CHECK(best <= initial);

  const Checkpoint* selected = &run.checkpoints.front();
  for (const Checkpoint& cp : run.checkpoints)
    if (cp.validation_loss < selected->validation_loss) selected = &cp;
  CHECK(selected->student.content_hash() == run.student.content_hash());
}

TEST_CASE("sft_teacher honors its contract") {
  const DatasetSplits data = make_data(TaskKind::copy, {1, 1}, 73, 150, 30, 30);
  const TabularLM teacher0 =
      TabularLM::random_init(Vocab::with_size(16), 3, ModelRole::teacher, 79);

  SUBCASE("zero epochs returns the model unchanged, frozen") {
    const SftResult r = sft_teacher(teacher0, data.train, data.valid, 0, 0.5, 83);
    CHECK(r.model.content_hash() == teacher0.content_hash());
    CHECK(r.model.frozen());
    CHECK(r.checkpoints.size() == 1);
  }

  SUBCASE("the running best validation NLL is non-increasing") {
    const SftResult r = sft_teacher(teacher0, data.train, data.valid, 3, 0.5, 89);
    double best = r.checkpoints.front().validation_loss;
    for (const Checkpoint& cp : r.checkpoints) {
      const double candidate = std::min(best, cp.validation_loss);
      CHECK(candidate <= best);
      best = candidate;
    }
    CHECK(r.model.frozen());
  }
}

TEST_CASE("an order-3 teacher masters single-digit modular sums") {
  const DatasetSplits data = make_data(TaskKind::modular_sum, {1, 1}, 109, 800, 150, 300);
  const TabularLM teacher0 =
      TabularLM::random_init(Vocab::with_size(16), 3, ModelRole::teacher, 113);
  const SftResult sft = sft_teacher(teacher0, data.train, data.valid, 3, 0.5, 127);
  const EvalResult eval = evaluate_dataset(sft.model, nullptr, data.test, 32,
                                           DivergenceMetric{MetricKind::forward_kl, 1e-12});
  CHECK(eval.accuracy >= 0.95);
}

TEST_CASE("distill validates its inputs") {
  const DatasetSplits data = make_data(TaskKind::copy, {1, 1}, 97, 10, 5, 5);
  TabularLM unfrozen = TabularLM::random_init(Vocab::with_size(16), 3, ModelRole::teacher, 101);
  const TabularLM student =
      TabularLM::random_init(Vocab::with_size(16), 2, ModelRole::student, 103);
  const KDConfig cfg = make_cfg(PolicyName::sft, 107);
  CHECK_THROWS_AS(distill(unfrozen, student, data.train, data.valid, data.test, cfg),
                  std::invalid_argument);
  unfrozen.freeze();
  CHECK_THROWS_AS(distill(unfrozen, student, {}, data.valid, data.test, cfg),
                  std::invalid_argument);

  KDConfig bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(distill(unfrozen, student, data.train, data.valid, data.test, bad),
                  std::invalid_argument);
}

TEST_CASE("shuffles are deterministic permutations") {
  const auto a = shuffled_indices(100, substream(5, "shuffle", 0));
  const auto b = shuffled_indices(100, substream(5, "shuffle", 0));
  const auto c = shuffled_indices(100, substream(5, "shuffle", 1));
  CHECK(a == b);
  CHECK(a != c);
  std::vector<char> seen(100, 0);
  for (size_t v : a) seen[v] = 1;
  for (char s : seen) CHECK(s == 1);
}
