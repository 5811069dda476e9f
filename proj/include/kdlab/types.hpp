// Core value types shared across the library: token alphabet and
// next-token probability distributions.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace kdlab {

using Token = int32_t;
using TokenSeq = std::vector<Token>;

// Token alphabet. The three reserved ids occupy the top of the id range so
// payload tokens form the contiguous block [0, size - 3); for modular-sum
// tasks the payload tokens double as digits modulo (size - 3).
struct Vocab {
  int32_t size = 0;
  Token bos = -1;
  Token eos = -1;
  Token pad = -1;

  static Vocab with_size(int32_t n) {
    Vocab v;
    v.size = n;
    v.bos = n - 3;
    v.eos = n - 2;
    v.pad = n - 1;
    v.validate();
    return v;
  }

  int32_t payload_count() const { return size - 3; }
  bool is_reserved(Token t) const { return t == bos || t == eos || t == pad; }
  bool contains(Token t) const { return t >= 0 && t < size; }

  // Throws std::invalid_argument if any invariant is broken.
  void validate() const {
    if (size < 4) throw std::invalid_argument("vocab.size must be >= 4");
    if (!contains(bos) || !contains(eos) || !contains(pad))
      throw std::invalid_argument("vocab reserved ids must lie in [0, size)");
    if (bos == eos || eos == pad || bos == pad)
      throw std::invalid_argument("vocab BOS/EOS/PAD must be distinct");
  }

  bool operator==(const Vocab&) const = default;
};

// Normalized next-token distribution over a vocabulary.
struct ProbDist {
  std::vector<double> p;

  ProbDist() = default;
  explicit ProbDist(std::vector<double> probs) : p(std::move(probs)) {}

  size_t size() const { return p.size(); }
  double operator[](size_t i) const { return p[i]; }

  // Entries non-negative, sum within 1e-9 of 1. Throws on violation.
  void validate() const {
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw std::invalid_argument("probability entries must be >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("probabilities must sum to 1 within 1e-9");
  }
};

}  // namespace kdlab
