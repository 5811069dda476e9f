// Synthetic sequence tasks: deterministic generators for (prompt, target)
// pairs over a small token alphabet, plus exact-match scoring and JSONL
// serialization of datasets.
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kdlab/types.hpp"

namespace kdlab {

enum class TaskKind { copy, modular_sum, weighted_grammar };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

struct Example {
  std::string id;
  TokenSeq prompt;  // begins with BOS
  TokenSeq target;  // ends with EOS
};

struct LengthRange {
  int lo = 1;
  int hi = 1;
  bool operator==(const LengthRange&) const = default;
};

struct TaskSpec {
  TaskKind kind = TaskKind::copy;
  Vocab vocab = Vocab::with_size(16);
  LengthRange prompt_len{1, 1};   // prompt body length (excluding BOS)
  LengthRange target_len{1, 24};  // target length bound (weighted_grammar only)
  uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct DatasetSplits {
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;
};

// The analytically correct target for a prompt body, excluding tasks whose
// targets are sampled (weighted_grammar has no deterministic target).
// copy: body reversed + EOS; modular_sum: running sums mod (size-3) + EOS.
TokenSeq task_target(TaskKind kind, std::span<const Token> prompt_body, const Vocab& vocab);

// Deterministic for fixed (spec, counts): three disjoint splits whose ids
// never collide. Each split owns an isolated RNG seeded from (seed, name).
DatasetSplits generate_dataset(const TaskSpec& spec, int n_train, int n_valid, int n_test);

// True iff the sequences are identical after stripping trailing EOS/PAD.
bool exact_match(std::span<const Token> prediction, std::span<const Token> target,
                 const Vocab& vocab);

// Newline-delimited JSON records {id, prompt: [int], target: [int]}.
void write_examples_jsonl(std::ostream& os, std::span<const Example> examples);
std::vector<Example> read_examples_jsonl(std::istream& is);

}  // namespace kdlab
