// Trace log JSONL encoding.

#include "kdlab/trace.hpp"

#include <stdexcept>

#include <json.hpp>

namespace kdlab {

namespace {
using nlohmann::json;
}

std::string to_string(TokenSource s) {
  switch (s) {
    case TokenSource::student: return "student";
    case TokenSource::teacher: return "teacher";
    case TokenSource::ground_truth: return "ground_truth";
  }
  throw std::logic_error("unreachable token source");
}

TokenSource token_source_from_string(const std::string& s) {
  if (s == "student") return TokenSource::student;
  if (s == "teacher") return TokenSource::teacher;
  if (s == "ground_truth") return TokenSource::ground_truth;
  throw std::invalid_argument("unknown token source: " + s);
}

std::string trace_to_json_line(const std::string& id, int64_t step,
                               const GenerationTrace& trace) {
  json sources = json::array();
  for (TokenSource s : trace.sources) sources.push_back(to_string(s));
  json j{{"id", id},
         {"step", step},
         {"tokens", trace.tokens},
         {"sources", std::move(sources)},
         {"step_divergences", trace.step_divergences},
         {"calls", {{"student", trace.student_forward_calls}, {"teacher", trace.teacher_forward_calls}}}};
  if (trace.switch_event) {
    j["switch_index"] = trace.switch_event->position;
    j["switch"] = {{"position", trace.switch_event->position},
                   {"d_switch", trace.switch_event->divergence_at_switch},
                   {"tau", trace.switch_event->threshold_at_switch}};
  } else {
    j["switch_index"] = nullptr;
    j["switch"] = nullptr;
  }
  return j.dump();
}

TraceLogEntry trace_from_json_line(const std::string& line) {
  json j = json::parse(line);
  TraceLogEntry entry;
  entry.id = j.at("id").get<std::string>();
  entry.step = j.at("step").get<int64_t>();
  entry.trace.tokens = j.at("tokens").get<TokenSeq>();
  for (const auto& s : j.at("sources"))
    entry.trace.sources.push_back(token_source_from_string(s.get<std::string>()));
  entry.trace.step_divergences = j.at("step_divergences").get<std::vector<double>>();
  entry.trace.student_forward_calls = j.at("calls").at("student").get<uint64_t>();
  entry.trace.teacher_forward_calls = j.at("calls").at("teacher").get<uint64_t>();
  if (!j.at("switch").is_null()) {
    SwitchEvent ev;
    ev.position = j.at("switch").at("position").get<int>();
    ev.divergence_at_switch = j.at("switch").at("d_switch").get<double>();
    ev.threshold_at_switch = j.at("switch").at("tau").get<double>();
    entry.trace.switch_event = ev;
  }
  return entry;
}

}  // namespace kdlab
