#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kdlab/adaswitch.hpp"
#include "kdlab/policies.hpp"
#include "test_support.hpp"

using namespace kdlab;
using testsupport::clone_as_student;
using testsupport::make_scripted_pair;
using testsupport::sources_match_one_time_switch;

namespace {

const DivergenceMetric kForward{MetricKind::forward_kl, 1e-12};

SwitchConfig make_cfg(int window, double multiplier, int alpha) {
  SwitchConfig cfg;
  cfg.window_length = window;
  cfg.threshold_multiplier = multiplier;
  cfg.metric = kForward;
  cfg.alpha = alpha;
  return cfg;
}

}  // namespace

TEST_CASE("sliding mean covers exactly the most recent window") {
  CHECK(sliding_mean(std::vector<double>{0.2, 0.4, 0.6}, 3) == doctest::Approx(0.4));
  CHECK(sliding_mean(std::vector<double>{9, 9, 0.2, 0.4, 0.6}, 3) == doctest::Approx(0.4));
  CHECK(sliding_mean(std::vector<double>{0.7, 0.7, 0.7, 0.7}, 4) == doctest::Approx(0.7));
  CHECK_THROWS_AS(sliding_mean(std::vector<double>{0.1, 0.2}, 3), std::invalid_argument);
}

TEST_CASE("threshold scales the window mean") {
  CHECK(switch_threshold(0.4, 3.0) == doctest::Approx(1.2));
  CHECK(switch_threshold(0.0, 3.0) == 0.0);
  CHECK(switch_threshold(0.37, 1.0) == doctest::Approx(0.37));
  CHECK_THROWS_AS(switch_threshold(-0.1, 3.0), std::invalid_argument);
}

TEST_CASE("hand replay: spike at step four fires the switch") {
  // d = (0.1, 0.1, 0.1, 0.5), L = 3, K = 3: at i = 4 the window mean is 0.1,
  // tau = 0.3, and 0.5 > 0.3 fires the switch.
  auto pair = make_scripted_pair({0.1, 0.1, 0.1, 0.5}, kForward, 6);
  const SwitchConfig cfg = make_cfg(3, 3.0, 6);
  Rng rng(1);
  const GenerationTrace trace = adaswitch_generate(pair.student, pair.teacher, pair.example,
                                                   pair.greedy, pair.greedy, cfg, rng);

  REQUIRE(trace.switch_event.has_value());
  CHECK(trace.switch_event->position == 4);
  CHECK(trace.switch_event->divergence_at_switch == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(trace.switch_event->threshold_at_switch == doctest::Approx(0.3).epsilon(1e-8));

  REQUIRE(trace.step_divergences.size() == 4);
  CHECK(trace.step_divergences[0] == doctest::Approx(0.1).epsilon(1e-8));
  CHECK(trace.step_divergences[3] == doctest::Approx(0.5).epsilon(1e-8));

  REQUIRE(trace.tokens.size() == 6);
  for (size_t i = 0; i < trace.sources.size(); ++i)
    CHECK(trace.sources[i] == (i < 3 ? TokenSource::student : TokenSource::teacher));

  // Counters: student evaluated through the switch step, teacher every step.
  CHECK(trace.student_forward_calls == 4);
  CHECK(trace.teacher_forward_calls == 6);
}

TEST_CASE("sequence divergence is the arithmetic mean of the step divergences") {
  // Per-step divergences {0.2, 0.4} average to 0.3.
  auto pair = make_scripted_pair({0.2, 0.4}, kForward, 2);
  const TokenSeq y{0, 1};  // the deterministic cycle tokens for two steps
  const double d = sequence_divergence(kForward, pair.teacher, pair.student,
                                       pair.example.prompt, y);
  CHECK(d == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("no spike means a pure student rollout") {
  auto pair = make_scripted_pair({0.2, 0.2, 0.2, 0.2, 0.2, 0.2}, kForward, 6);
  const SwitchConfig cfg = make_cfg(3, 3.0, 6);
  Rng rng(1);
  const GenerationTrace trace = adaswitch_generate(pair.student, pair.teacher, pair.example,
                                                   pair.greedy, pair.greedy, cfg, rng);
  CHECK_FALSE(trace.switch_event.has_value());
  CHECK(trace.step_divergences.size() == 6);
  for (TokenSource s : trace.sources) CHECK(s == TokenSource::student);
  CHECK(trace.student_forward_calls == 6);
  CHECK(trace.teacher_forward_calls == 6);
}

TEST_CASE("a huge threshold multiplier reduces to the on-policy rollout") {
  const Vocab vocab = Vocab::with_size(12);
  const TabularLM student = TabularLM::random_init(vocab, 2, ModelRole::student, 7);
  const TabularLM teacher = TabularLM::random_init(vocab, 3, ModelRole::teacher, 11, 1.0);
  const Example ex{"e", {vocab.bos, 3, 4}, {4, 3, vocab.eos}};
  const SamplingConfig soft{1.0, 1.0, false};
  const SwitchConfig cfg = make_cfg(10, 1e18, 24);
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng a(seed), b(seed);
    const GenerationTrace ada =
        adaswitch_generate(student, teacher, ex, soft, soft, cfg, a);
    const GenerationTrace on = select_target_on_policy(student, ex, soft, 24, b);
    CHECK_FALSE(ada.switch_event.has_value());
    CHECK(ada.tokens == on.tokens);
    CHECK(ada.sources == on.sources);
  }
}

TEST_CASE("identical models never switch") {
  const Vocab vocab = Vocab::with_size(10);
  const TabularLM teacher = TabularLM::random_init(vocab, 2, ModelRole::teacher, 13, 1.0);
  const TabularLM student = clone_as_student(teacher);
  const Example ex{"e", {vocab.bos, 1}, {1, vocab.eos}};
  const SamplingConfig soft{1.0, 1.0, false};
  const SwitchConfig cfg = make_cfg(2, 3.0, 16);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const GenerationTrace trace = adaswitch_generate(student, teacher, ex, soft, soft, cfg, rng);
    CHECK_FALSE(trace.switch_event.has_value());
    for (double d : trace.step_divergences) CHECK(d == 0.0);
    for (TokenSource s : trace.sources) CHECK(s == TokenSource::student);
  }
}

TEST_CASE("an early EOS leaves no room for a switch") {
  const Vocab vocab = Vocab::with_size(8);
  TabularLM student(vocab, 1, ModelRole::student);
  TabularLM teacher(vocab, 1, ModelRole::teacher);
  for (size_t r = 0; r < student.row_count(); ++r) {
    student.mutable_row(r)[static_cast<size_t>(vocab.eos)] = 30.0;
    teacher.mutable_row(r)[static_cast<size_t>(vocab.eos)] = -5.0;
  }
  const Example ex{"e", {vocab.bos}, {vocab.eos}};
  const SamplingConfig greedy{1.0, 1.0, true};
  const SwitchConfig cfg = make_cfg(10, 3.0, 32);
  Rng rng(1);
  const GenerationTrace trace =
      adaswitch_generate(student, teacher, ex, greedy, greedy, cfg, rng);
  CHECK(trace.tokens == TokenSeq{vocab.eos});
  CHECK_FALSE(trace.switch_event.has_value());
}

TEST_CASE("increasing the multiplier never fires the switch earlier") {
  Rng script_rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> script(12);
    for (double& v : script) v = 0.05 + 1.5 * script_rng.uniform01();
    auto pair = make_scripted_pair(script, kForward, 12);
    int previous_position = 0;  // 0 encodes "no switch possible yet"
    bool previous_switched = true;
    for (double multiplier : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      const SwitchConfig cfg = make_cfg(3, multiplier, 12);
      Rng rng(1);
      const GenerationTrace trace = adaswitch_generate(pair.student, pair.teacher, pair.example,
                                                       pair.greedy, pair.greedy, cfg, rng);
      const bool switched = trace.switch_event.has_value();
      const int position = switched ? trace.switch_event->position : 0;
      if (!previous_switched) CHECK_FALSE(switched);  // once gone, stays gone
      if (switched && previous_switched && previous_position > 0)
        CHECK(position >= previous_position);
      previous_position = position;
      previous_switched = switched;
    }
  }
}

TEST_CASE("random-model traces always follow the one-time-switch pattern") {
  Rng meta(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Vocab vocab = Vocab::with_size(6 + static_cast<int32_t>(meta.below(10)));
    const TabularLM student = TabularLM::random_init(vocab, 1 + static_cast<int>(meta.below(2)),
                                                     ModelRole::student, meta.next_u64(), 2.0);
    const TabularLM teacher = TabularLM::random_init(vocab, 1 + static_cast<int>(meta.below(3)),
                                                     ModelRole::teacher, meta.next_u64(), 2.0);
    const Example ex{"e", {vocab.bos, static_cast<Token>(meta.below(vocab.payload_count()))},
                     {vocab.eos}};
    const SwitchConfig cfg =
        make_cfg(1 + static_cast<int>(meta.below(6)), 0.5 + 2.0 * meta.uniform01(), 24);
    const SamplingConfig sampling{0.5 + meta.uniform01(), 0.4 + 0.6 * meta.uniform01(), false};
    Rng rng(meta.next_u64());
    const GenerationTrace trace =
        adaswitch_generate(student, teacher, ex, sampling, sampling, cfg, rng);
    CHECK(sources_match_one_time_switch(trace));
    // Counter identity: the teacher is consulted every step; the student up
    // to and including the switch step.
    CHECK(trace.teacher_forward_calls == trace.tokens.size());
    if (trace.switch_event) {
      CHECK(trace.switch_event->position > cfg.window_length);
      CHECK(trace.switch_event->divergence_at_switch > trace.switch_event->threshold_at_switch);
      CHECK(trace.step_divergences.size() == static_cast<size_t>(trace.switch_event->position));
      CHECK(trace.student_forward_calls ==
            static_cast<uint64_t>(trace.switch_event->position));
    } else {
      CHECK(trace.step_divergences.size() == trace.tokens.size());
      CHECK(trace.student_forward_calls == trace.tokens.size());
    }
  }
}
