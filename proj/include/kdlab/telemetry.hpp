// Aggregates the analysis quantities of a distillation run: switch rate,
// divergence at switch, relative switch position, loss curves and
// forward-call runtime proxies, windowed over fixed step intervals.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kdlab/trace.hpp"

namespace kdlab {

struct WindowStats {
  int64_t step = 0;  // last step of the window
  double switch_rate = 0.0;
  double mean_divergence_at_switch = 0.0;     // NaN when no trace switched
  double mean_relative_switch_position = 0.0; // NaN when no trace switched
  double mean_train_loss = 0.0;
  double validation_loss = 0.0;  // latest checkpoint value at window end
  double test_accuracy = 0.0;
  uint64_t cum_student_calls = 0;
  uint64_t cum_teacher_calls = 0;
};

struct RunReport {
  int window_size = 100;
  std::vector<WindowStats> windows;
};

struct ValidationPoint {
  int64_t step = 0;
  double validation_loss = 0.0;
  double accuracy = 0.0;
};

struct StepLoss {
  int64_t step = 0;
  double loss = 0.0;
};

// Fraction of traces that triggered a switch.
double switch_rate(std::span<const GenerationTrace> traces);

// Fraction of a switched trace's tokens produced by the student:
// (switch_index - 1) / |tokens|. Throws if the trace never switched.
double relative_switch_position(const GenerationTrace& trace);

// Ratio of weighted cumulative forward calls between two runs over identical
// datasets; per-call weights default to student 1, teacher 3.
double runtime_proxy(const RunReport& a, const RunReport& b, double student_weight = 1.0,
                     double teacher_weight = 3.0);
double weighted_forward_calls(const RunReport& report, double student_weight = 1.0,
                              double teacher_weight = 3.0);

// Pure fold over the raw trace log; aggregates are recomputable exactly.
RunReport build_report(std::span<const TraceLogEntry> traces, std::span<const StepLoss> losses,
                       std::span<const ValidationPoint> validations, int window_size = 100);

// CSV with stable column order:
// step,switch_rate,d_at_switch,rel_pos,train_loss,val_loss,accuracy,s_calls,t_calls
void write_report_csv(std::ostream& os, const RunReport& report);
std::string report_to_json_string(const RunReport& report);

}  // namespace kdlab
