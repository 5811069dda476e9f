// Dataset evaluation kernels. The OpenMP versions fill per-example slots and
// reduce serially in index order, so they are bit-identical to the serial
// references at any thread count.

#include "kdlab/eval.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace kdlab {

namespace {

Token argmax_token(std::span<const double> row) {
  size_t best = 0;
  for (size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return static_cast<Token>(best);
}

double sequence_nll(const TabularLM& model, std::span<const Token> prompt,
                    std::span<const Token> y) {
  TokenSeq ctx(prompt.begin(), prompt.end());
  double sum = 0.0;
  for (Token tok : y) {
    const ProbDist q = base_dist(model, ctx);
    sum += -std::log(std::max(q.p[static_cast<size_t>(tok)], 1e-300));
    ctx.push_back(tok);
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace

TokenSeq greedy_decode(const TabularLM& model, std::span<const Token> prompt, int alpha) {
  if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
  TokenSeq ctx(prompt.begin(), prompt.end());
  TokenSeq out;
  for (int i = 0; i < alpha; ++i) {
    const Token tok = argmax_token(model.logits_row(ctx));
    out.push_back(tok);
    ctx.push_back(tok);
    if (tok == model.vocab().eos) break;
  }
  return out;
}

EvalResult evaluate_dataset(const TabularLM& model, const TabularLM* teacher,
                            std::span<const Example> dataset, int alpha,
                            const DivergenceMetric& metric) {
  if (dataset.empty()) throw std::invalid_argument("evaluate_dataset: dataset must be nonempty");
  const auto n = static_cast<int64_t>(dataset.size());
  std::vector<char> correct(dataset.size(), 0);
  std::vector<double> divergences(dataset.size(), 0.0);

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const Example& ex = dataset[i];
    const TokenSeq prediction = greedy_decode(model, ex.prompt, alpha);
    correct[i] = exact_match(prediction, ex.target, model.vocab()) ? 1 : 0;
    if (teacher != nullptr)
      divergences[i] = sequence_divergence(metric, *teacher, model, ex.prompt, ex.target);
  }

  EvalResult result;
  int64_t hits = 0;
  for (int64_t i = 0; i < n; ++i) hits += correct[i];
  result.accuracy = static_cast<double>(hits) / static_cast<double>(n);
  if (teacher != nullptr) {
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) sum += divergences[i];
    result.mean_divergence = sum / static_cast<double>(n);
  }
  return result;
}

EvalResult evaluate_dataset_serial(const TabularLM& model, const TabularLM* teacher,
                                   std::span<const Example> dataset, int alpha,
                                   const DivergenceMetric& metric) {
  if (dataset.empty()) throw std::invalid_argument("evaluate_dataset: dataset must be nonempty");
  int64_t hits = 0;
  double sum = 0.0;
  for (const Example& ex : dataset) {
    const TokenSeq prediction = greedy_decode(model, ex.prompt, alpha);
    if (exact_match(prediction, ex.target, model.vocab())) ++hits;
    if (teacher != nullptr)
      sum += sequence_divergence(metric, *teacher, model, ex.prompt, ex.target);
  }
  EvalResult result;
  result.accuracy = static_cast<double>(hits) / static_cast<double>(dataset.size());
  if (teacher != nullptr) result.mean_divergence = sum / static_cast<double>(dataset.size());
  return result;
}

double mean_sequence_divergence(const TabularLM& teacher, const TabularLM& student,
                                std::span<const Example> dataset,
                                const DivergenceMetric& metric) {
  if (dataset.empty()) throw std::invalid_argument("dataset must be nonempty");
  const auto n = static_cast<int64_t>(dataset.size());
  std::vector<double> values(dataset.size(), 0.0);

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    values[i] = sequence_divergence(metric, teacher, student, dataset[i].prompt,
                                    dataset[i].target);

  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

double mean_sequence_divergence_serial(const TabularLM& teacher, const TabularLM& student,
                                       std::span<const Example> dataset,
                                       const DivergenceMetric& metric) {
  if (dataset.empty()) throw std::invalid_argument("dataset must be nonempty");
  double sum = 0.0;
  for (const Example& ex : dataset)
    sum += sequence_divergence(metric, teacher, student, ex.prompt, ex.target);
  return sum / static_cast<double>(dataset.size());
}

double mean_nll(const TabularLM& model, std::span<const Example> dataset) {
  if (dataset.empty()) throw std::invalid_argument("dataset must be nonempty");
  const auto n = static_cast<int64_t>(dataset.size());
  std::vector<double> values(dataset.size(), 0.0);

#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    values[i] = sequence_nll(model, dataset[i].prompt, dataset[i].target);

  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

double mean_nll_serial(const TabularLM& model, std::span<const Example> dataset) {
  if (dataset.empty()) throw std::invalid_argument("dataset must be nonempty");
  double sum = 0.0;
  for (const Example& ex : dataset) sum += sequence_nll(model, ex.prompt, ex.target);
  return sum / static_cast<double>(dataset.size());
}

}  // namespace kdlab
