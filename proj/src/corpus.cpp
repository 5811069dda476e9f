// Synthetic task generators, exact-match scoring and dataset JSONL.

#include "kdlab/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "kdlab/rng.hpp"

namespace kdlab {

namespace {

using nlohmann::json;

std::string split_id(std::string_view split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*s-%05d", static_cast<int>(split.size()), split.data(),
                index);
  return std::string(buf);
}

// Fixed stochastic right-linear grammar over the payload alphabet. Each
// state emits EOS with probability 1/4, otherwise a payload token with a
// state-rotated harmonic weight; the token drives the next state.
constexpr int kGrammarStates = 3;
constexpr double kGrammarStopProb = 0.25;

int grammar_start_state(std::span<const Token> prompt_body) {
  long sum = 0;
  for (Token t : prompt_body) sum += t;
  return static_cast<int>(sum % kGrammarStates);
}

Token grammar_emit(int state, int payload, Rng& rng) {
  double total = 0.0;
  for (int t = 0; t < payload; ++t) total += 1.0 / (1.0 + (t + 3 * state) % payload);
  double u = rng.uniform01() * total;
  double cum = 0.0;
  for (int t = 0; t < payload; ++t) {
    cum += 1.0 / (1.0 + (t + 3 * state) % payload);
    if (u < cum) return t;
  }
  return payload - 1;
}

TokenSeq sample_grammar_target(std::span<const Token> prompt_body, const Vocab& vocab,
                               const LengthRange& target_len, Rng& rng) {
  constexpr int kMaxAttempts = 100000;
  const int payload = vocab.payload_count();
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    TokenSeq body;
    int state = grammar_start_state(prompt_body);
    while (static_cast<int>(body.size()) < target_len.hi) {
      if (rng.uniform01() < kGrammarStopProb) break;
      Token t = grammar_emit(state, payload, rng);
      body.push_back(t);
      state = (state + t) % kGrammarStates;
    }
    if (static_cast<int>(body.size()) >= target_len.lo) {
      body.push_back(vocab.eos);
      return body;
    }
  }
  throw std::runtime_error("weighted-grammar target sampling failed to satisfy target_len");
}

Example make_example(const TaskSpec& spec, std::string id, Rng& rng) {
  const int payload = spec.vocab.payload_count();
  const int span = spec.prompt_len.hi - spec.prompt_len.lo + 1;
  const int body_len = spec.prompt_len.lo + static_cast<int>(rng.below(span));

  TokenSeq body(body_len);
  for (Token& t : body) t = static_cast<Token>(rng.below(payload));

  Example ex;
  ex.id = std::move(id);
  ex.prompt.reserve(body.size() + 1);
  ex.prompt.push_back(spec.vocab.bos);
  ex.prompt.insert(ex.prompt.end(), body.begin(), body.end());
  if (spec.kind == TaskKind::weighted_grammar) {
    ex.target = sample_grammar_target(body, spec.vocab, spec.target_len, rng);
  } else {
    ex.target = task_target(spec.kind, body, spec.vocab);
  }
  return ex;
}

std::vector<Example> make_split(const TaskSpec& spec, std::string_view name, int count) {
  Rng rng = substream(spec.seed, name);
  std::vector<Example> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(make_example(spec, split_id(name, i), rng));
  return out;
}

}  // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::copy: return "copy";
    case TaskKind::modular_sum: return "modular-sum";
    case TaskKind::weighted_grammar: return "weighted-grammar";
  }
  throw std::logic_error("unreachable task kind");
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "copy") return TaskKind::copy;
  if (s == "modular-sum") return TaskKind::modular_sum;
  if (s == "weighted-grammar") return TaskKind::weighted_grammar;
  throw std::invalid_argument("unknown task kind: " + s);
}

void TaskSpec::validate() const {
  vocab.validate();
  if (vocab.bos != vocab.size - 3 || vocab.eos != vocab.size - 2 || vocab.pad != vocab.size - 1)
    throw std::invalid_argument("task.vocab: reserved ids must occupy the top of the id range");
  if (prompt_len.lo < 1) throw std::invalid_argument("task.prompt_len: lo must be >= 1");
  if (prompt_len.hi < prompt_len.lo)
    throw std::invalid_argument("task.prompt_len: hi must be >= lo");
  if (target_len.lo < 1) throw std::invalid_argument("task.target_len: lo must be >= 1");
  if (target_len.hi < target_len.lo)
    throw std::invalid_argument("task.target_len: hi must be >= lo");
}

TokenSeq task_target(TaskKind kind, std::span<const Token> prompt_body, const Vocab& vocab) {
  TokenSeq target;
  target.reserve(prompt_body.size() + 1);
  switch (kind) {
    case TaskKind::copy:
      target.assign(prompt_body.rbegin(), prompt_body.rend());
      break;
    case TaskKind::modular_sum: {
      const int modulus = vocab.payload_count();
      long running = 0;
      for (Token t : prompt_body) {
        running = (running + t) % modulus;
        target.push_back(static_cast<Token>(running));
      }
      break;
    }
    case TaskKind::weighted_grammar:
      throw std::invalid_argument("weighted-grammar targets are sampled, not derived");
  }
  target.push_back(vocab.eos);
  return target;
}

DatasetSplits generate_dataset(const TaskSpec& spec, int n_train, int n_valid, int n_test) {
  spec.validate();
  if (n_train < 1 || n_valid < 1 || n_test < 1)
    throw std::invalid_argument("dataset counts must be >= 1");
  DatasetSplits splits;
  splits.train = make_split(spec, "train", n_train);
  splits.valid = make_split(spec, "valid", n_valid);
  splits.test = make_split(spec, "test", n_test);
  return splits;
}

bool exact_match(std::span<const Token> prediction, std::span<const Token> target,
                 const Vocab& vocab) {
  auto strip = [&](std::span<const Token> seq) {
    size_t n = seq.size();
    while (n > 0 && (seq[n - 1] == vocab.eos || seq[n - 1] == vocab.pad)) --n;
    return seq.first(n);
  };
  auto a = strip(prediction);
  auto b = strip(target);
  return std::ranges::equal(a, b);
}

void write_examples_jsonl(std::ostream& os, std::span<const Example> examples) {
  for (const Example& ex : examples) {
    json j{{"id", ex.id}, {"prompt", ex.prompt}, {"target", ex.target}};
    os << j.dump() << '\n';
  }
}

std::vector<Example> read_examples_jsonl(std::istream& is) {
  std::vector<Example> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Example ex;
    ex.id = j.at("id").get<std::string>();
    ex.prompt = j.at("prompt").get<TokenSeq>();
    ex.target = j.at("target").get<TokenSeq>();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace kdlab
