// Generation traces: the tokens a target-selection policy produced, who
// produced each one, the per-step divergences recorded along the way, and
// forward-call counters for runtime accounting.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kdlab/types.hpp"

namespace kdlab {

enum class TokenSource : uint8_t { student, teacher, ground_truth };

std::string to_string(TokenSource s);
TokenSource token_source_from_string(const std::string& s);

struct SwitchEvent {
  int position = 0;                   // 1-based step index where the switch fired
  double divergence_at_switch = 0.0;  // the d_i that exceeded tau
  double threshold_at_switch = 0.0;   // tau = multiplier * window mean
};

struct GenerationTrace {
  TokenSeq prompt;
  TokenSeq tokens;
  std::vector<TokenSource> sources;      // one per token
  std::vector<double> step_divergences;  // empty where not computed
  std::optional<SwitchEvent> switch_event;
  uint64_t student_forward_calls = 0;
  uint64_t teacher_forward_calls = 0;

  std::optional<int> switch_index() const {
    if (switch_event) return switch_event->position;
    return std::nullopt;
  }
};

// One line of a trace log: {id, step, tokens, sources, step_divergences,
// switch_index, switch: {position, d_switch, tau}, calls}.
std::string trace_to_json_line(const std::string& id, int64_t step,
                               const GenerationTrace& trace);

struct TraceLogEntry {
  std::string id;
  int64_t step = 0;
  GenerationTrace trace;
};

TraceLogEntry trace_from_json_line(const std::string& line);

}  // namespace kdlab
