// Context-conditioned softmax-table autoregressive model with exact analytic
// gradients. A model of order m predicts the next token from the last m
// tokens of the context (left-padded with BOS), through one logits row per
// possible context.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kdlab/corpus.hpp"
#include "kdlab/divergence.hpp"
#include "kdlab/rng.hpp"
#include "kdlab/types.hpp"

namespace kdlab {

enum class ModelRole { teacher, student };

std::string to_string(ModelRole role);
ModelRole model_role_from_string(const std::string& s);

struct SamplingConfig {
  double temperature = 1.0;
  double top_p = 1.0;
  bool greedy = false;  // greedy ignores temperature/top_p

  void validate() const;
};

class TabularLM {
 public:
  TabularLM(Vocab vocab, int context_order, ModelRole role);

  // Logits ~ uniform(-scale, scale); small so the initial model is near
  // uniform over the vocabulary.
  static TabularLM random_init(Vocab vocab, int context_order, ModelRole role,
                               uint64_t seed, double scale = 0.01);

  const Vocab& vocab() const { return vocab_; }
  int context_order() const { return order_; }
  ModelRole role() const { return role_; }
  size_t row_count() const { return rows_; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  // Index of the logits row for a context (its last m tokens, BOS-padded).
  // The context must be nonempty.
  size_t row_index(std::span<const Token> context) const;
  std::span<const double> logits_row(std::span<const Token> context) const;
  std::span<const double> row(size_t index) const;

  // Throws std::logic_error if the model is frozen.
  std::span<double> mutable_row(size_t index);

  // FNV-1a over the logits bytes; used by immutability checks.
  uint64_t content_hash() const;

  std::string to_json_string() const;
  static TabularLM from_json_string(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static TabularLM load(const std::filesystem::path& path);

  bool operator==(const TabularLM& other) const;

 private:
  Vocab vocab_;
  int order_ = 1;
  ModelRole role_ = ModelRole::student;
  bool frozen_ = false;
  size_t rows_ = 0;
  std::vector<double> logits_;  // row-major [vocab^m][vocab]
};

// Softmax of logits / temperature, max-subtracted for stability.
ProbDist softmax(std::span<const double> logits, double temperature = 1.0);

// Keep the smallest set of highest-probability tokens with cumulative mass
// >= top_p, zero the rest, renormalize. top_p >= 1 is the identity.
ProbDist apply_top_p(const ProbDist& dist, double top_p);

// One-hot at the argmax; ties break toward the lowest token id.
ProbDist greedy_one_hot(std::span<const double> logits);

// Full sampling pipeline applied to one logits row.
ProbDist sampling_dist(std::span<const double> logits, const SamplingConfig& cfg);

// The distribution the model would sample from under cfg.
ProbDist next_dist(const TabularLM& model, std::span<const Token> context,
                   const SamplingConfig& cfg);

// Untruncated temperature-1 distribution; divergence computations always
// consume this one, truncation applies only to sampling.
ProbDist base_dist(const TabularLM& model, std::span<const Token> context);

// Inverse-CDF draw; deterministic given the RNG state. Zero-probability
// tokens are never returned.
Token sample_token(const ProbDist& dist, Rng& rng);

// Sparse gradient: touched student logits rows only; untouched rows are
// implicitly zero.
struct GradientTable {
  std::unordered_map<size_t, std::vector<double>> rows;
};

struct LossAndGrad {
  double loss = 0.0;
  GradientTable grad;
};

// Mean per-position divergence of the student from the teacher along y,
// with the exact analytic derivative with respect to every touched student
// logits row.
LossAndGrad loss_and_gradient(const TabularLM& student, const TabularLM& teacher,
                              std::span<const Token> prompt, std::span<const Token> y,
                              const DivergenceMetric& metric);

// Mean negative log-likelihood of y under the model, with gradient.
LossAndGrad nll_loss_and_gradient(const TabularLM& model, std::span<const Token> prompt,
                                  std::span<const Token> y);

// One SGD step: row -= learning_rate * gradient row.
void apply_gradient(TabularLM& model, const GradientTable& grad, double learning_rate);

// One NLL gradient step on a single example.
void sft_step(TabularLM& model, const Example& example, double learning_rate);

// Mean token divergence along y; equals loss_and_gradient's loss.
double sequence_divergence(const DivergenceMetric& metric, const TabularLM& teacher,
                           const TabularLM& student, std::span<const Token> prompt,
                           std::span<const Token> y);

}  // namespace kdlab
