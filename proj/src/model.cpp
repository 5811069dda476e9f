// Tabular autoregressive model: dense logits table over all length-m
// contexts, softmax/temperature/top-p sampling, and exact analytic gradients
// of the divergence and NLL losses.

#include "kdlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kdlab {

namespace {

using nlohmann::json;

constexpr size_t kMaxTableEntries = size_t{1} << 24;

size_t table_rows(int32_t vocab_size, int order) {
  size_t rows = 1;
  for (int i = 0; i < order; ++i) {
    rows *= static_cast<size_t>(vocab_size);
    if (rows * static_cast<size_t>(vocab_size) > kMaxTableEntries)
      throw std::invalid_argument("model table too large: vocab^order exceeds the entry budget");
  }
  return rows;
}

// Per-entry gradient of the clamped token divergence with respect to the
// student logits row. p is the teacher distribution (constant), q the
// student softmax.
std::vector<double> divergence_gradient(const DivergenceMetric& metric,
                                        const std::vector<double>& p,
                                        const std::vector<double>& q) {
  const double eps = metric.epsilon;
  const size_t n = p.size();
  std::vector<double> g(n, 0.0);
  switch (metric.kind) {
    case MetricKind::forward_kl: {
      // d = sum_j p_j (ln p_j - ln max(q_j, eps))
      double s = 0.0;
      for (size_t j = 0; j < n; ++j)
        if (p[j] > 0.0 && q[j] > eps) s += p[j];
      for (size_t k = 0; k < n; ++k)
        g[k] = q[k] * s - ((p[k] > 0.0 && q[k] > eps) ? p[k] : 0.0);
      break;
    }
    case MetricKind::reverse_kl: {
      // d = sum_j q_j (ln q_j - ln max(p_j, eps))
      std::vector<double> r(n, 0.0);
      double mean_r = 0.0;
      for (size_t j = 0; j < n; ++j) {
        if (q[j] <= 0.0) continue;
        r[j] = std::log(q[j]) - std::log(std::max(p[j], eps));
        mean_r += q[j] * r[j];
      }
      for (size_t k = 0; k < n; ++k)
        if (q[k] > 0.0) g[k] = q[k] * (r[k] - mean_r);
      break;
    }
    case MetricKind::jsd: {
      // d = 1/2 KL(p || max(m, eps)) + 1/2 KL(q || max(m, eps)), m = (p+q)/2
      double mean_s = 0.0, a1 = 0.0, b1 = 0.0;
      std::vector<double> s(n, 0.0);
      std::vector<double> m(n, 0.0);
      for (size_t j = 0; j < n; ++j) {
        m[j] = 0.5 * (p[j] + q[j]);
        if (q[j] > 0.0) {
          s[j] = std::log(q[j]) - std::log(std::max(m[j], eps));
          mean_s += q[j] * s[j];
        }
        if (m[j] > eps) {
          if (p[j] > 0.0) a1 += p[j] * q[j] / m[j];
          b1 += q[j] * q[j] / m[j];
        }
      }
      for (size_t k = 0; k < n; ++k) {
        if (q[k] <= 0.0) continue;
        double direct = 0.0;
        if (m[k] > eps) {
          if (p[k] > 0.0) direct += p[k] * q[k] / m[k];
          direct += q[k] * q[k] / m[k];
        }
        g[k] = 0.5 * q[k] * (s[k] - mean_s) - 0.25 * (direct - q[k] * (a1 + b1));
      }
      break;
    }
  }
  return g;
}

}  // namespace

std::string to_string(ModelRole role) {
  return role == ModelRole::teacher ? "teacher" : "student";
}

ModelRole model_role_from_string(const std::string& s) {
  if (s == "teacher") return ModelRole::teacher;
  if (s == "student") return ModelRole::student;
  throw std::invalid_argument("unknown model role: " + s);
}

void SamplingConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("sampling.temperature must be > 0");
  if (!(top_p > 0.0) || top_p > 1.0)
    throw std::invalid_argument("sampling.top_p must lie in (0, 1]");
}

TabularLM::TabularLM(Vocab vocab, int context_order, ModelRole role)
    : vocab_(vocab), order_(context_order), role_(role) {
  vocab_.validate();
  if (order_ < 1) throw std::invalid_argument("context_order must be >= 1");
  rows_ = table_rows(vocab_.size, order_);
  logits_.assign(rows_ * static_cast<size_t>(vocab_.size), 0.0);
}

TabularLM TabularLM::random_init(Vocab vocab, int context_order, ModelRole role, uint64_t seed,
                                 double scale) {
  TabularLM model(vocab, context_order, role);
  Rng rng(seed);
  for (double& v : model.logits_) v = (2.0 * rng.uniform01() - 1.0) * scale;
  return model;
}

size_t TabularLM::row_index(std::span<const Token> context) const {
  if (context.empty()) throw std::invalid_argument("context must contain at least BOS");
  const size_t n = context.size();
  const auto m = static_cast<size_t>(order_);
  size_t idx = 0;
  for (size_t j = 0; j < m; ++j) {
    // Oldest-to-newest over the last m tokens, BOS-padded on the left.
    Token t = (n + j < m) ? vocab_.bos : context[n + j - m];
    if (!vocab_.contains(t)) throw std::invalid_argument("context token outside vocabulary");
    idx = idx * static_cast<size_t>(vocab_.size) + static_cast<size_t>(t);
  }
  return idx;
}

std::span<const double> TabularLM::logits_row(std::span<const Token> context) const {
  return row(row_index(context));
}

std::span<const double> TabularLM::row(size_t index) const {
  return {logits_.data() + index * static_cast<size_t>(vocab_.size),
          static_cast<size_t>(vocab_.size)};
}

std::span<double> TabularLM::mutable_row(size_t index) {
  if (frozen_) throw std::logic_error("model is frozen; parameters are immutable");
  return {logits_.data() + index * static_cast<size_t>(vocab_.size),
          static_cast<size_t>(vocab_.size)};
}

uint64_t TabularLM::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, size_t len) {
    const auto* bytes = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(&vocab_.size, sizeof(vocab_.size));
  mix(&order_, sizeof(order_));
  mix(logits_.data(), logits_.size() * sizeof(double));
  return h;
}

std::string TabularLM::to_json_string() const {
  json j{{"format_version", 1},
         {"vocab",
          {{"size", vocab_.size}, {"bos", vocab_.bos}, {"eos", vocab_.eos}, {"pad", vocab_.pad}}},
         {"context_order", order_},
         {"role", to_string(role_)},
         {"frozen", frozen_},
         {"logits", logits_}};
  return j.dump();
}

TabularLM TabularLM::from_json_string(const std::string& text) {
  json j = json::parse(text);
  if (j.at("format_version").get<int>() != 1)
    throw std::invalid_argument("unsupported model format version");
  Vocab vocab;
  vocab.size = j.at("vocab").at("size").get<int32_t>();
  vocab.bos = j.at("vocab").at("bos").get<Token>();
  vocab.eos = j.at("vocab").at("eos").get<Token>();
  vocab.pad = j.at("vocab").at("pad").get<Token>();
  TabularLM model(vocab, j.at("context_order").get<int>(),
                  model_role_from_string(j.at("role").get<std::string>()));
  auto logits = j.at("logits").get<std::vector<double>>();
  if (logits.size() != model.logits_.size())
    throw std::invalid_argument("model logits size does not match vocab^order * vocab");
  model.logits_ = std::move(logits);
  if (j.at("frozen").get<bool>()) model.freeze();
  return model;
}

void TabularLM::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open model file for writing: " + path.string());
  os << to_json_string() << '\n';
}

TabularLM TabularLM::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_string(ss.str());
}

bool TabularLM::operator==(const TabularLM& other) const {
  return vocab_ == other.vocab_ && order_ == other.order_ && role_ == other.role_ &&
         frozen_ == other.frozen_ && logits_ == other.logits_;
}

ProbDist softmax(std::span<const double> logits, double temperature) {
  std::vector<double> scaled(logits.size());
  for (size_t j = 0; j < logits.size(); ++j) scaled[j] = logits[j] / temperature;
  const double top = *std::max_element(scaled.begin(), scaled.end());
  double sum = 0.0;
  for (double& v : scaled) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : scaled) v /= sum;
  return ProbDist(std::move(scaled));
}

ProbDist apply_top_p(const ProbDist& dist, double top_p) {
  if (top_p >= 1.0) return dist;
  const size_t n = dist.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (dist.p[a] != dist.p[b]) return dist.p[a] > dist.p[b];
    return a < b;
  });
  std::vector<double> out(n, 0.0);
  double kept = 0.0;
  for (size_t r = 0; r < n; ++r) {
    const size_t j = order[r];
    out[j] = dist.p[j];
    kept += dist.p[j];
    if (kept >= top_p) break;
  }
  for (double& v : out) v /= kept;
  return ProbDist(std::move(out));
}

ProbDist greedy_one_hot(std::span<const double> logits) {
  size_t best = 0;
  for (size_t j = 1; j < logits.size(); ++j)
    if (logits[j] > logits[best]) best = j;
  std::vector<double> out(logits.size(), 0.0);
  out[best] = 1.0;
  return ProbDist(std::move(out));
}

ProbDist sampling_dist(std::span<const double> logits, const SamplingConfig& cfg) {
  if (cfg.greedy) return greedy_one_hot(logits);
  return apply_top_p(softmax(logits, cfg.temperature), cfg.top_p);
}

ProbDist next_dist(const TabularLM& model, std::span<const Token> context,
                   const SamplingConfig& cfg) {
  cfg.validate();
  return sampling_dist(model.logits_row(context), cfg);
}

ProbDist base_dist(const TabularLM& model, std::span<const Token> context) {
  return softmax(model.logits_row(context), 1.0);
}

Token sample_token(const ProbDist& dist, Rng& rng) {
  const double u = rng.uniform01();
  double cum = 0.0;
  Token last_positive = -1;
  for (size_t j = 0; j < dist.size(); ++j) {
    if (dist.p[j] <= 0.0) continue;
    last_positive = static_cast<Token>(j);
    cum += dist.p[j];
    if (u < cum) return last_positive;
  }
  if (last_positive < 0) throw std::invalid_argument("cannot sample from an all-zero distribution");
  return last_positive;
}

LossAndGrad loss_and_gradient(const TabularLM& student, const TabularLM& teacher,
                              std::span<const Token> prompt, std::span<const Token> y,
                              const DivergenceMetric& metric) {
  if (y.empty()) throw std::invalid_argument("loss_and_gradient: y must be nonempty");
  metric.validate();
  TokenSeq ctx(prompt.begin(), prompt.end());
  LossAndGrad out;
  double loss_sum = 0.0;
  for (Token tok : y) {
    const ProbDist p_t = base_dist(teacher, ctx);
    const ProbDist p_s = base_dist(student, ctx);
    loss_sum += token_divergence(metric, p_t, p_s);
    const std::vector<double> g = divergence_gradient(metric, p_t.p, p_s.p);
    const size_t row = student.row_index(ctx);
    auto [it, inserted] = out.grad.rows.try_emplace(row, g.size(), 0.0);
    for (size_t j = 0; j < g.size(); ++j) it->second[j] += g[j];
    ctx.push_back(tok);
  }
  const double inv_len = 1.0 / static_cast<double>(y.size());
  out.loss = loss_sum * inv_len;
  for (auto& [row, g] : out.grad.rows)
    for (double& v : g) v *= inv_len;
  return out;
}

LossAndGrad nll_loss_and_gradient(const TabularLM& model, std::span<const Token> prompt,
                                  std::span<const Token> y) {
  if (y.empty()) throw std::invalid_argument("nll_loss_and_gradient: y must be nonempty");
  TokenSeq ctx(prompt.begin(), prompt.end());
  LossAndGrad out;
  double loss_sum = 0.0;
  for (Token tok : y) {
    if (!model.vocab().contains(tok)) throw std::invalid_argument("target token outside vocabulary");
    const ProbDist q = base_dist(model, ctx);
    loss_sum += -std::log(std::max(q.p[static_cast<size_t>(tok)], 1e-300));
    const size_t row = model.row_index(ctx);
    auto [it, inserted] = out.grad.rows.try_emplace(row, q.size(), 0.0);
    for (size_t j = 0; j < q.size(); ++j) it->second[j] += q.p[j];
    it->second[static_cast<size_t>(tok)] -= 1.0;
    ctx.push_back(tok);
  }
  const double inv_len = 1.0 / static_cast<double>(y.size());
  out.loss = loss_sum * inv_len;
  for (auto& [row, g] : out.grad.rows)
    for (double& v : g) v *= inv_len;
  return out;
}

void apply_gradient(TabularLM& model, const GradientTable& grad, double learning_rate) {
  for (const auto& [row, g] : grad.rows) {
    auto target = model.mutable_row(row);
    for (size_t j = 0; j < target.size(); ++j) target[j] -= learning_rate * g[j];
  }
}

void sft_step(TabularLM& model, const Example& example, double learning_rate) {
  const LossAndGrad lg = nll_loss_and_gradient(model, example.prompt, example.target);
  apply_gradient(model, lg.grad, learning_rate);
}

double sequence_divergence(const DivergenceMetric& metric, const TabularLM& teacher,
                           const TabularLM& student, std::span<const Token> prompt,
                           std::span<const Token> y) {
  if (y.empty()) throw std::invalid_argument("sequence_divergence: y must be nonempty");
  TokenSeq ctx(prompt.begin(), prompt.end());
  double sum = 0.0;
  for (Token tok : y) {
    sum += token_divergence(metric, base_dist(teacher, ctx), base_dist(student, ctx));
    ctx.push_back(tok);
  }
  return sum * (1.0 / static_cast<double>(y.size()));
}

}  // namespace kdlab
