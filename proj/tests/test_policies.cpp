#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kdlab/policies.hpp"
#include "kdlab/trainer.hpp"
#include "test_support.hpp"

using namespace kdlab;
using testsupport::clone_as_student;

namespace {

const Vocab kVocab = Vocab::with_size(16);
const SamplingConfig kSoft{1.0, 1.0, false};
const SamplingConfig kGreedy{1.0, 1.0, true};

Example make_example(TokenSeq body, const Vocab& vocab = kVocab) {
  Example ex;
  ex.id = "ex";
  ex.prompt.push_back(vocab.bos);
  ex.prompt.insert(ex.prompt.end(), body.begin(), body.end());
  ex.target = task_target(TaskKind::copy, body, vocab);
  return ex;
}

bool same_tokens_and_sources(const GenerationTrace& a, const GenerationTrace& b) {
  return a.tokens == b.tokens && a.sources == b.sources;
}

// A model whose every row is one-hot at the given token.
TabularLM constant_model(const Vocab& vocab, int order, ModelRole role, Token peak) {
  TabularLM model(vocab, order, role);
  for (size_t r = 0; r < model.row_count(); ++r)
    model.mutable_row(r)[static_cast<size_t>(peak)] = 30.0;
  return model;
}

}  // namespace

TEST_CASE("sft and off-policy traces pass the ground truth through") {
  const Example ex = make_example({4, 5});
  for (const GenerationTrace& trace : {select_target_sft(ex), select_target_off_policy(ex)}) {
    CHECK(trace.tokens == ex.target);
    for (TokenSource s : trace.sources) CHECK(s == TokenSource::ground_truth);
    CHECK(trace.student_forward_calls == 0);
    CHECK(trace.teacher_forward_calls == 0);
  }
  // deterministic on replay
  CHECK(same_tokens_and_sources(select_target_sft(ex), select_target_sft(ex)));
}

TEST_CASE("seqkd rollout follows a converged greedy teacher") {
  TaskSpec spec;
  spec.kind = TaskKind::copy;
  spec.vocab = kVocab;
  spec.prompt_len = {1, 1};
  spec.seed = 5;
  const DatasetSplits data = generate_dataset(spec, 200, 40, 1);
  const TabularLM teacher0 = TabularLM::random_init(kVocab, 3, ModelRole::teacher, 9);
  const SftResult sft = sft_teacher(teacher0, data.train, data.valid, 3, 0.5, 11);

  const Example ex = make_example({3});
  Rng rng(1);
  const GenerationTrace trace = select_target_seqkd(sft.model, ex, kGreedy, 32, rng);
  CHECK(trace.tokens == TokenSeq{3, kVocab.eos});
  CHECK(trace.teacher_forward_calls == trace.tokens.size());
  CHECK(trace.student_forward_calls == 0);
  for (TokenSource s : trace.sources) CHECK(s == TokenSource::teacher);
}

TEST_CASE("a teacher that opens with EOS yields a single-token trace") {
  const TabularLM teacher = constant_model(kVocab, 1, ModelRole::teacher, kVocab.eos);
  Rng rng(2);
  const GenerationTrace trace = select_target_seqkd(teacher, make_example({1}), kGreedy, 32, rng);
  CHECK(trace.tokens == TokenSeq{kVocab.eos});
  CHECK(trace.teacher_forward_calls == 1);
}

TEST_CASE("on-policy rollouts respect the cap and replay bit-identically") {
  const TabularLM student = TabularLM::random_init(kVocab, 2, ModelRole::student, 13);
  const Example ex = make_example({2, 7});
  Rng a(3), b(3);
  const GenerationTrace ta = select_target_on_policy(student, ex, kSoft, 8, a);
  const GenerationTrace tb = select_target_on_policy(student, ex, kSoft, 8, b);
  CHECK(ta.tokens.size() <= 8);
  CHECK(same_tokens_and_sources(ta, tb));
  CHECK(ta.student_forward_calls == ta.tokens.size());
  for (TokenSource s : ta.sources) CHECK(s == TokenSource::student);

  // greedy rollout is reproducible without an RNG effect
  Rng c(4), d(99);
  CHECK(same_tokens_and_sources(select_target_on_policy(student, ex, kGreedy, 8, c),
                                select_target_on_policy(student, ex, kGreedy, 8, d)));
}

TEST_CASE("imitkd mixes at the sequence level") {
  const TabularLM student = TabularLM::random_init(kVocab, 2, ModelRole::student, 17);
  const Example ex = make_example({1, 2, 3});

  SUBCASE("mix probability 1 always returns ground truth") {
    Rng rollout(5), mix(6);
    const GenerationTrace t = select_target_imitkd(student, ex, kSoft, 16, 1.0, rollout, mix);
    CHECK(t.tokens == ex.target);
    CHECK(t.sources.front() == TokenSource::ground_truth);
  }

  SUBCASE("mix probability 0 is bit-identical to pure on-policy") {
    Rng rollout(7), mix(8), pure(7);
    const GenerationTrace t = select_target_imitkd(student, ex, kSoft, 16, 0.0, rollout, mix);
    const GenerationTrace p = select_target_on_policy(student, ex, kSoft, 16, pure);
    CHECK(same_tokens_and_sources(t, p));
  }

  SUBCASE("the ground-truth fraction concentrates near the mix probability") {
    int ground = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      Rng rollout(static_cast<uint64_t>(i) + 1000);
      Rng mix(static_cast<uint64_t>(i));
      const GenerationTrace t = select_target_imitkd(student, ex, kSoft, 16, 0.5, rollout, mix);
      if (!t.sources.empty() && t.sources.front() == TokenSource::ground_truth) ++ground;
    }
    CHECK(std::abs(ground / static_cast<double>(n) - 0.5) < 0.02);
  }

  SUBCASE("every trace is one of the two pure shapes") {
    for (int i = 0; i < 200; ++i) {
      Rng rollout(static_cast<uint64_t>(i)), mix(static_cast<uint64_t>(i) * 31 + 7);
      const GenerationTrace t = select_target_imitkd(student, ex, kSoft, 16, 0.4, rollout, mix);
      REQUIRE(!t.sources.empty());
      const TokenSource first = t.sources.front();
      CHECK((first == TokenSource::ground_truth || first == TokenSource::student));
      for (TokenSource s : t.sources) CHECK(s == first);
      if (first == TokenSource::ground_truth) {
        CHECK(t.tokens == ex.target);
      } else {
        Rng pure(static_cast<uint64_t>(i));
        CHECK(same_tokens_and_sources(t, select_target_on_policy(student, ex, kSoft, 16, pure)));
      }
    }
  }
}

TEST_CASE("nucleus membership follows the top-mass prefix") {
  const ProbDist d{{0.6, 0.3, 0.1}};
  CHECK(in_top_mass(d, 0.5, 0));
  CHECK_FALSE(in_top_mass(d, 0.5, 1));
  CHECK_FALSE(in_top_mass(d, 0.5, 2));
  CHECK(in_top_mass(d, 0.7, 1));
  CHECK(in_top_mass(d, 1.0, 2));
}

TEST_CASE("skd accepts in-nucleus proposals and resamples the rest") {
  const TabularLM student = TabularLM::random_init(kVocab, 2, ModelRole::student, 19, 2.0);
  const TabularLM teacher = TabularLM::random_init(kVocab, 3, ModelRole::teacher, 23, 2.0);
  const Example ex = make_example({4});

  SUBCASE("k_skd = 1 accepts every proposal") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed), pure(seed);
      const GenerationTrace t =
          select_target_skd(student, teacher, ex, kSoft, kSoft, 16, 1.0, rng);
      for (TokenSource s : t.sources) CHECK(s == TokenSource::student);
      CHECK(t.tokens == select_target_on_policy(student, ex, kSoft, 16, pure).tokens);
      CHECK(t.student_forward_calls == t.tokens.size());
      CHECK(t.teacher_forward_calls == t.tokens.size());
    }
  }

  SUBCASE("identical greedy models reproduce the teacher greedy rollout") {
    const TabularLM twin = clone_as_student(teacher);
    Rng rng(3), pure(4);
    const GenerationTrace t =
        select_target_skd(twin, teacher, ex, kGreedy, kGreedy, 16, 0.5, rng);
    const GenerationTrace g = select_target_seqkd(teacher, ex, kGreedy, 16, pure);
    CHECK(t.tokens == g.tokens);
    for (TokenSource s : t.sources) CHECK(s == TokenSource::student);
  }

  SUBCASE("both models are evaluated at every step") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed * 7 + 1);
      const GenerationTrace t =
          select_target_skd(student, teacher, ex, kSoft, kSoft, 12, 0.3, rng);
      CHECK(t.student_forward_calls == t.tokens.size());
      CHECK(t.teacher_forward_calls == t.tokens.size());
      bool saw_teacher = false;
      for (TokenSource s : t.sources) saw_teacher |= s == TokenSource::teacher;
      (void)saw_teacher;  // mixing is expected but not guaranteed per trace
    }
  }
}

TEST_CASE("every policy respects the trace invariants") {
  const TabularLM student = TabularLM::random_init(kVocab, 2, ModelRole::student, 29);
  const TabularLM teacher = TabularLM::random_init(kVocab, 3, ModelRole::teacher, 31);
  const Example ex = make_example({5, 6, 7});
  const int alpha = 10;
  for (uint64_t seed = 0; seed < 30; ++seed) {
    Rng r1(seed), r2(seed + 1), r3(seed + 2), r4(seed + 3);
    const GenerationTrace traces[] = {
        select_target_sft(ex),
        select_target_off_policy(ex),
        select_target_seqkd(teacher, ex, kSoft, alpha, r1),
        select_target_on_policy(student, ex, kSoft, alpha, r2),
        select_target_imitkd(student, ex, kSoft, alpha, 0.5, r3, r4),
        [&] {
          Rng r(seed + 4);
          return select_target_skd(student, teacher, ex, kSoft, kSoft, alpha, 0.5, r);
        }(),
    };
    for (const GenerationTrace& t : traces) {
      REQUIRE(!t.tokens.empty());
      CHECK(t.sources.size() == t.tokens.size());
      const bool gt_trace = t.sources.front() == TokenSource::ground_truth;
      if (!gt_trace) CHECK(t.tokens.size() <= static_cast<size_t>(alpha));
      const bool ends_eos = t.tokens.back() == kVocab.eos;
      const bool at_cap = gt_trace || t.tokens.size() == static_cast<size_t>(alpha);
      CHECK((ends_eos || at_cap));
      for (size_t i = 0; i + 1 < t.tokens.size(); ++i) CHECK(t.tokens[i] != kVocab.eos);
    }
  }
}
