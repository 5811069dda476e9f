// Benchmark comparing the OpenMP evaluation/enumeration kernels against
// their serial references. Results must agree bit-for-bit; timings show the
// fan-out speedup.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kdlab/corpus.hpp"
#include "kdlab/eval.hpp"
#include "kdlab/oracle.hpp"
#include "kdlab/rng.hpp"

using namespace kdlab;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    f();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
  std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms, equal ? "match" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif

  TaskSpec task;
  task.kind = TaskKind::modular_sum;
  task.vocab = Vocab::with_size(16);
  task.prompt_len = {8, 16};
  task.seed = 7;
  const DatasetSplits data = generate_dataset(task, 4000, 1, 1);

  const TabularLM teacher =
      TabularLM::random_init(task.vocab, 3, ModelRole::teacher, 11, 1.0);
  const TabularLM student =
      TabularLM::random_init(task.vocab, 2, ModelRole::student, 13, 1.0);
  const DivergenceMetric metric{MetricKind::forward_kl, 1e-12};
  constexpr int kAlpha = 32;
  constexpr int kReps = 3;

  bool all_equal = true;

  {
    EvalResult serial_result, parallel_result;
    const double serial_ms = time_best_of(
        kReps, [&] { serial_result = evaluate_dataset_serial(student, &teacher, data.train, kAlpha, metric); });
    const double parallel_ms = time_best_of(
        kReps, [&] { parallel_result = evaluate_dataset(student, &teacher, data.train, kAlpha, metric); });
    const bool equal = serial_result.accuracy == parallel_result.accuracy &&
                       serial_result.mean_divergence == parallel_result.mean_divergence;
    all_equal &= equal;
    report("evaluate_dataset", serial_ms, parallel_ms, equal);
  }

  {
    double serial_value = 0, parallel_value = 0;
    const double serial_ms = time_best_of(kReps, [&] {
      serial_value = mean_sequence_divergence_serial(teacher, student, data.train, metric);
    });
    const double parallel_ms = time_best_of(kReps, [&] {
      parallel_value = mean_sequence_divergence(teacher, student, data.train, metric);
    });
    const bool equal = serial_value == parallel_value;
    all_equal &= equal;
    report("mean_sequence_divergence", serial_ms, parallel_ms, equal);
  }

  {
    const Vocab small = Vocab::with_size(8);
    const TabularLM t8 = TabularLM::random_init(small, 2, ModelRole::teacher, 19, 1.0);
    const TabularLM s8 = TabularLM::random_init(small, 1, ModelRole::student, 23, 1.0);
    const TokenSeq prompt{small.bos};
    const SamplingConfig soft{1.0, 1.0, false};
    SwitchConfig sw;
    sw.window_length = 2;
    sw.threshold_multiplier = 1.5;
    sw.alpha = 6;
    const EnumerationSpec spec{6};

    ExactDivergence serial_result, parallel_result;
    const double serial_ms = time_best_of(1, [&] {
      serial_result = exact_expected_sequence_divergence_serial(
          OraclePolicy::adaswitch, t8, s8, prompt, soft, soft, sw, metric, spec);
    });
    const double parallel_ms = time_best_of(1, [&] {
      parallel_result = exact_expected_sequence_divergence(
          OraclePolicy::adaswitch, t8, s8, prompt, soft, soft, sw, metric, spec);
    });
    const bool equal = serial_result.value == parallel_result.value &&
                       serial_result.total_probability == parallel_result.total_probability &&
                       serial_result.trace_count == parallel_result.trace_count;
    all_equal &= equal;
    report("enumeration_oracle", serial_ms, parallel_ms, equal);
    std::printf("  enumeration traces: %llu, total probability %.12f\n",
                static_cast<unsigned long long>(parallel_result.trace_count),
                parallel_result.total_probability);
  }

  return all_equal ? EXIT_SUCCESS : EXIT_FAILURE;
}
