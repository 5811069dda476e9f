// Windowed aggregation of trace logs into run reports, CSV/JSON export and
// the forward-call runtime proxy.

#include "kdlab/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace kdlab {

namespace {

using nlohmann::json;

// Shortest round-trip decimal form; locale-independent and deterministic.
std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double switch_rate(std::span<const GenerationTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("switch_rate: trace collection is empty");
  size_t switched = 0;
  for (const GenerationTrace& t : traces)
    if (t.switch_event) ++switched;
  return static_cast<double>(switched) / static_cast<double>(traces.size());
}

double relative_switch_position(const GenerationTrace& trace) {
  if (!trace.switch_event)
    throw std::invalid_argument("relative_switch_position: trace never switched");
  return static_cast<double>(trace.switch_event->position - 1) /
         static_cast<double>(trace.tokens.size());
}

double weighted_forward_calls(const RunReport& report, double student_weight,
                              double teacher_weight) {
  if (report.windows.empty()) return 0.0;
  const WindowStats& last = report.windows.back();
  return student_weight * static_cast<double>(last.cum_student_calls) +
         teacher_weight * static_cast<double>(last.cum_teacher_calls);
}

double runtime_proxy(const RunReport& a, const RunReport& b, double student_weight,
                     double teacher_weight) {
  const double num = weighted_forward_calls(a, student_weight, teacher_weight);
  const double denom = weighted_forward_calls(b, student_weight, teacher_weight);
  if (denom == 0.0) {
    if (num == 0.0) return 1.0;  // identical zero-call reports
    throw std::invalid_argument("runtime_proxy: reference run has zero calls");
  }
  return num / denom;
}

RunReport build_report(std::span<const TraceLogEntry> traces, std::span<const StepLoss> losses,
                       std::span<const ValidationPoint> validations, int window_size) {
  if (window_size < 1) throw std::invalid_argument("window_size must be >= 1");
  RunReport report;
  report.window_size = window_size;

  int64_t max_step = 0;
  for (const auto& t : traces) max_step = std::max(max_step, t.step);
  for (const auto& l : losses) max_step = std::max(max_step, l.step);
  if (max_step == 0) return report;

  const auto nan = std::numeric_limits<double>::quiet_NaN();
  const int64_t n_windows = (max_step + window_size - 1) / window_size;
  report.windows.resize(n_windows);

  struct Acc {
    int64_t traces = 0, switched = 0, loss_count = 0;
    double d_sum = 0, pos_sum = 0, loss_sum = 0;
    uint64_t s_calls = 0, t_calls = 0;
  };
  std::vector<Acc> acc(n_windows);

  for (const auto& entry : traces) {
    const int64_t w = (entry.step - 1) / window_size;
    Acc& a = acc[w];
    ++a.traces;
    a.s_calls += entry.trace.student_forward_calls;
    a.t_calls += entry.trace.teacher_forward_calls;
    if (entry.trace.switch_event) {
      ++a.switched;
      a.d_sum += entry.trace.switch_event->divergence_at_switch;
      a.pos_sum += relative_switch_position(entry.trace);
    }
  }
  for (const auto& l : losses) {
    Acc& a = acc[(l.step - 1) / window_size];
    ++a.loss_count;
    a.loss_sum += l.loss;
  }

  uint64_t cum_s = 0, cum_t = 0;
  for (int64_t w = 0; w < n_windows; ++w) {
    const Acc& a = acc[w];
    WindowStats& ws = report.windows[w];
    ws.step = std::min<int64_t>((w + 1) * window_size, max_step);
    ws.switch_rate = a.traces > 0 ? static_cast<double>(a.switched) / a.traces : nan;
    ws.mean_divergence_at_switch = a.switched > 0 ? a.d_sum / a.switched : nan;
    ws.mean_relative_switch_position = a.switched > 0 ? a.pos_sum / a.switched : nan;
    ws.mean_train_loss = a.loss_count > 0 ? a.loss_sum / a.loss_count : nan;
    cum_s += a.s_calls;
    cum_t += a.t_calls;
    ws.cum_student_calls = cum_s;
    ws.cum_teacher_calls = cum_t;

    ws.validation_loss = nan;
    ws.test_accuracy = nan;
    for (const auto& v : validations) {
      if (v.step <= ws.step) {
        ws.validation_loss = v.validation_loss;
        ws.test_accuracy = v.accuracy;
      }
    }
  }
  return report;
}

void write_report_csv(std::ostream& os, const RunReport& report) {
  os << "step,switch_rate,d_at_switch,rel_pos,train_loss,val_loss,accuracy,s_calls,t_calls\n";
  for (const WindowStats& w : report.windows) {
    os << w.step << ',' << format_double(w.switch_rate) << ','
       << format_double(w.mean_divergence_at_switch) << ','
       << format_double(w.mean_relative_switch_position) << ','
       << format_double(w.mean_train_loss) << ',' << format_double(w.validation_loss) << ','
       << format_double(w.test_accuracy) << ',' << w.cum_student_calls << ','
       << w.cum_teacher_calls << '\n';
  }
}

std::string report_to_json_string(const RunReport& report) {
  json windows = json::array();
  for (const WindowStats& w : report.windows) {
    windows.push_back({{"step", w.step},
                       {"switch_rate", w.switch_rate},
                       {"d_at_switch", w.mean_divergence_at_switch},
                       {"rel_pos", w.mean_relative_switch_position},
                       {"train_loss", w.mean_train_loss},
                       {"val_loss", w.validation_loss},
                       {"accuracy", w.test_accuracy},
                       {"s_calls", w.cum_student_calls},
                       {"t_calls", w.cum_teacher_calls}});
  }
  json j{{"window_size", report.window_size}, {"windows", std::move(windows)}};
  return j.dump(2);
}

}  // namespace kdlab
