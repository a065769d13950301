#include "hashtrace/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hashtrace {

const HashCode& CenterSet::at(std::uint32_t id) const {
  auto it = centers_.find(id);
  if (it == centers_.end()) throw std::out_of_range("no center for group " + std::to_string(id));
  return it->second;
}

void CenterSet::set(std::uint32_t id, HashCode center) {
  if (k_ == 0) k_ = center.size();
  if (center.size() != k_) throw std::invalid_argument("center length does not match CenterSet k");
  centers_[id] = std::move(center);
}

std::vector<HashCode> CenterSet::codes() const {
  std::vector<HashCode> out;
  out.reserve(centers_.size());
  for (const auto& [id, c] : centers_) out.push_back(c);
  return out;
}

double to_unit(double x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return 0.5 * (x + 1.0);
    case Activation::kSigmoid:
      return x;
    case Activation::kRelu:
      return std::clamp(x, 0.0, 1.0);
  }
  return x;
}

double to_unit_grad(double x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return 0.5;
    case Activation::kSigmoid:
      return 1.0;
    case Activation::kRelu:
      return (x > 0.0 && x < 1.0) ? 1.0 : 0.0;
  }
  return 1.0;
}

std::vector<double> to_unit(const RelaxedCode& code) {
  std::vector<double> out(code.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_unit(code.values[i], code.activation);
  return out;
}

namespace {

double mean_abs_diff(std::span<const double> h, const HashCode& c) {
  if (h.size() != c.size()) {
    throw std::invalid_argument("loss: code length " + std::to_string(h.size()) +
                                " does not match center length " + std::to_string(c.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += std::abs(h[i] - (c.bit(i) ? 1.0 : 0.0));
  return s / static_cast<double>(h.size());
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

double intra_loss(std::span<const double> h, const HashCode& c) { return mean_abs_diff(h, c); }

double inter_loss(std::span<const double> h, const HashCode& c) { return 1.0 - mean_abs_diff(h, c); }

LossResult hash_triplet_loss(std::span<const LabeledCode> batch, const CenterSet& centers,
                             LossTerms terms) {
  if (batch.empty()) throw std::invalid_argument("hash_triplet_loss: empty batch");
  for (const auto& lc : batch) {
    if (!centers.contains(lc.group_id)) {
      throw std::invalid_argument("hash_triplet_loss: no center for group " +
                                  std::to_string(lc.group_id));
    }
  }
  LossResult r;
  r.grads.assign(batch.size(), std::vector<double>(centers.k(), 0.0));
  // Pair counts first; the per-pair gradient weights depend on them.
  for (const auto& lc : batch) {
    for (const auto& [id, c] : centers.entries()) {
      (void)c;
      if (id == lc.group_id) {
        ++r.m;
      } else {
        ++r.n;
      }
    }
  }
  if ((terms.intra && r.m == 0) || (terms.inter && r.n == 0)) {
    throw std::invalid_argument("hash_triplet_loss: degenerate batch (m=" + std::to_string(r.m) +
                                ", n=" + std::to_string(r.n) + ")");
  }
  const double kinv = 1.0 / static_cast<double>(centers.k());
  const double intra_w = terms.intra ? kinv / static_cast<double>(r.m) : 0.0;
  const double inter_w = terms.inter ? -kinv / static_cast<double>(r.n) : 0.0;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& h = batch[b].code;
    auto& g = r.grads[b];
    for (const auto& [id, c] : centers.entries()) {
      const bool same = id == batch[b].group_id;
      if (same) {
        r.intra_sum += intra_loss(h, c);
      } else {
        r.inter_sum += inter_loss(h, c);
      }
      const double w = same ? intra_w : inter_w;
      if (w == 0.0) continue;
      for (std::size_t i = 0; i < h.size(); ++i) g[i] += w * sgn(h[i] - (c.bit(i) ? 1.0 : 0.0));
    }
  }
  if (terms.intra) r.loss += r.intra_sum / static_cast<double>(r.m);
  if (terms.inter) r.loss += r.inter_sum / static_cast<double>(r.n);
  return r;
}

}  // namespace hashtrace
