#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "hashtrace/hash_code.hpp"

namespace hashtrace {

/// Relaxed code mapped into [0, 1]^k plus its group label.
struct LabeledCode {
  std::vector<double> code;
  std::uint32_t group_id = 0;
};

/// One binary center per group, all of length k.
class CenterSet {
 public:
  CenterSet() = default;
  explicit CenterSet(std::size_t k) : k_(k) {}

  std::size_t k() const { return k_; }
  std::size_t size() const { return centers_.size(); }
  bool empty() const { return centers_.empty(); }
  bool contains(std::uint32_t id) const { return centers_.count(id) != 0; }
  const HashCode& at(std::uint32_t id) const;
  void set(std::uint32_t id, HashCode center);

  const std::map<std::uint32_t, HashCode>& entries() const { return centers_; }
  std::vector<HashCode> codes() const;

  friend bool operator==(const CenterSet&, const CenterSet&) = default;

 private:
  std::size_t k_ = 0;
  std::map<std::uint32_t, HashCode> centers_;
};

/// tanh: (x + 1) / 2, sigmoid: x, relu: clamp(x, 0, 1).
double to_unit(double x, Activation act);
/// d to_unit / dx; zero outside the relu clamp range.
double to_unit_grad(double x, Activation act);
std::vector<double> to_unit(const RelaxedCode& code);

/// mean_i |h_i - c_i|
double intra_loss(std::span<const double> h, const HashCode& c);
/// 1 - mean_i |h_i - c_i|
double inter_loss(std::span<const double> h, const HashCode& c);

/// Which halves of the loss contribute (ablation switch).
struct LossTerms {
  bool intra = true;
  bool inter = true;
};

struct LossResult {
  double loss = 0.0;
  double intra_sum = 0.0;
  double inter_sum = 0.0;
  std::size_t m = 0;  // same-label (code, center) pairs
  std::size_t n = 0;  // different-label pairs
  std::vector<std::vector<double>> grads;  // d loss / d code, per batch entry
};

/// Every code is paired with every center: same label adds to the intra
/// sum, a different label to the inter sum; loss = intra / m + inter / n.
/// Gradients are exact subgradients with d|x|/dx = 0 at x = 0.
LossResult hash_triplet_loss(std::span<const LabeledCode> batch, const CenterSet& centers,
                             LossTerms terms = {});

}  // namespace hashtrace
