// Shared helpers for the test suites: randomized model construction, central
// finite-difference gradient checking, and scripted-divergence model pairs
// whose per-step divergence follows a prescribed sequence.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kdlab/adaswitch.hpp"
#include "kdlab/corpus.hpp"
#include "kdlab/model.hpp"
#include "kdlab/rng.hpp"

namespace kdlab::testsupport {

// Student copy that shares the teacher's logits table (fresh, unfrozen).
inline TabularLM clone_as_student(const TabularLM& source) {
  TabularLM out(source.vocab(), source.context_order(), ModelRole::student);
  for (size_t r = 0; r < source.row_count(); ++r) {
    const auto src = source.row(r);
    auto dst = out.mutable_row(r);
    for (size_t j = 0; j < src.size(); ++j) dst[j] = src[j];
  }
  return out;
}

// Central finite differences against the analytic gradient; returns the
// maximum floored relative error over every touched entry.
inline double max_gradient_error(const TabularLM& student,
                                 const std::function<double(const TabularLM&)>& loss_of,
                                 const GradientTable& analytic, double step = 1e-5) {
  double worst = 0.0;
  for (const auto& [row, grad] : analytic.rows) {
    for (size_t j = 0; j < grad.size(); ++j) {
      TabularLM plus = student;
      plus.mutable_row(row)[j] += step;
      TabularLM minus = student;
      minus.mutable_row(row)[j] -= step;
      const double numeric = (loss_of(plus) - loss_of(minus)) / (2.0 * step);
      const double denom = std::max({std::abs(grad[j]), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(grad[j] - numeric) / denom);
    }
  }
  return worst;
}

// A (student, teacher) pair over a deterministic token cycle whose step-i
// divergence equals script[i-1]. Both models are one-hot-peaked on the same
// next token, so greedy rollouts follow the cycle 0, 1, 2, ... regardless of
// which model samples; the teacher's peak height is solved by bisection to
// hit each scripted divergence. Steps beyond the script have divergence 0.
struct ScriptedPair {
  TabularLM student;
  TabularLM teacher;
  Example example;
  SamplingConfig greedy{1.0, 1.0, true};
};

inline ScriptedPair make_scripted_pair(const std::vector<double>& script,
                                       const DivergenceMetric& metric, int alpha) {
  const int payload_needed = alpha + 1;
  const Vocab vocab = Vocab::with_size(payload_needed + 3);
  const int payload = vocab.payload_count();
  constexpr double kPeak = 8.0;

  ScriptedPair pair{TabularLM(vocab, 1, ModelRole::student),
                    TabularLM(vocab, 1, ModelRole::teacher),
                    Example{"scripted", {vocab.bos}, {vocab.eos}}};

  auto next_token = [&](Token ctx) -> Token {
    if (ctx == vocab.bos) return 0;
    return static_cast<Token>((ctx + 1) % payload);
  };

  // Solve for the teacher peak b in (0, kPeak] with divergence(b) == target;
  // the divergence grows monotonically as b drops away from kPeak.
  auto solve_peak = [&](Token next, double target) -> double {
    std::vector<double> student_row(static_cast<size_t>(vocab.size), 0.0);
    student_row[static_cast<size_t>(next)] = kPeak;
    const ProbDist p_s = softmax(student_row, 1.0);
    auto divergence_at = [&](double b) {
      std::vector<double> teacher_row(static_cast<size_t>(vocab.size), 0.0);
      teacher_row[static_cast<size_t>(next)] = b;
      return token_divergence(metric, softmax(teacher_row, 1.0), p_s);
    };
    if (target == 0.0) return kPeak;
    double lo = 1e-9, hi = kPeak;
    if (divergence_at(lo) < target)
      throw std::invalid_argument("scripted divergence exceeds the reachable range");
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      (divergence_at(mid) > target ? lo : hi) = mid;
    }
    const double b = 0.5 * (lo + hi);
    if (std::abs(divergence_at(b) - target) > 1e-9)
      throw std::logic_error("scripted divergence bisection failed to converge");
    return b;
  };

  // Step i context ends with BOS (i = 1) or token i - 2.
  auto context_token_for_step = [&](int step) -> Token {
    return step == 1 ? vocab.bos : static_cast<Token>((step - 2) % payload);
  };

  for (int step = 1; step <= alpha; ++step) {
    const Token ctx = context_token_for_step(step);
    const Token next = next_token(ctx);
    const double target =
        step <= static_cast<int>(script.size()) ? script[static_cast<size_t>(step - 1)] : 0.0;
    const double teacher_peak = solve_peak(next, target);

    auto srow = pair.student.mutable_row(pair.student.row_index(TokenSeq{ctx}));
    auto trow = pair.teacher.mutable_row(pair.teacher.row_index(TokenSeq{ctx}));
    for (size_t j = 0; j < srow.size(); ++j) {
      srow[j] = 0.0;
      trow[j] = 0.0;
    }
    srow[static_cast<size_t>(next)] = kPeak;
    trow[static_cast<size_t>(next)] = teacher_peak;
  }
  return pair;
}

// The source pattern every adaswitch trace must satisfy: a run of student
// tokens followed by a run of teacher tokens, aligned with switch_index.
inline bool sources_match_one_time_switch(const GenerationTrace& trace) {
  if (trace.sources.size() != trace.tokens.size()) return false;
  size_t boundary = trace.sources.size();
  if (trace.switch_event) boundary = static_cast<size_t>(trace.switch_event->position - 1);
  for (size_t i = 0; i < trace.sources.size(); ++i) {
    const TokenSource want = i < boundary ? TokenSource::student : TokenSource::teacher;
    if (trace.sources[i] != want) return false;
  }
  return true;
}

}  // namespace kdlab::testsupport
