#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hashtrace/dataset.hpp"
#include "hashtrace/hash_code.hpp"

namespace hashtrace {

struct EncoderConfig {
  std::uint32_t D = static_cast<std::uint32_t>(kDescriptorDim);
  std::uint32_t E = 64;  // embedding width
  std::uint32_t k = 64;  // hash bits, multiple of 8
  std::uint32_t T = 8;   // clip length
  Activation activation = Activation::kTanh;
  std::uint32_t init_seed = 0;
  /// Head nonlinearity between the two affine layers; unset follows `activation`.
  std::optional<Activation> hidden;

  Activation hidden_activation() const { return hidden.value_or(activation); }

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Offsets of each tensor inside the flat parameter vector, in declaration
/// order: embed W (DxE), embed b, Wq, Wk, Wv (ExE), head1 W (ExE), head1 b,
/// head2 W (Exk), head2 b. Matrices are row-major (input, output).
struct ParamLayout {
  std::size_t embed_w, embed_b, wq, wk, wv, head1_w, head1_b, head2_w, head2_b, total;
  explicit ParamLayout(const EncoderConfig& cfg);
};

struct EncoderParams {
  EncoderConfig cfg;
  std::vector<double> values;

  ParamLayout layout() const { return ParamLayout(cfg); }
};

/// Same shape as the parameters.
using EncoderGrads = std::vector<double>;

EncoderParams init_params(const EncoderConfig& cfg);
EncoderParams zero_params(const EncoderConfig& cfg);

/// Intermediates kept for the reverse pass.
struct ForwardCache {
  std::size_t T = 0;
  std::vector<double> x;      // T x D
  std::vector<double> z;      // T x E, embedded frames
  std::vector<double> q, key, v;  // T x E
  std::vector<double> attn;   // T x T, row softmax
  std::vector<double> pooled; // E
  std::vector<double> u;      // E, head1 pre-activation
  std::vector<double> a;      // E, head1 activation
  std::vector<double> w;      // k, head2 pre-activation
  std::vector<double> out;    // k
};

RelaxedCode forward(const EncoderParams& p, const FeatureSequence& x, ForwardCache* cache = nullptr);

/// Gradient of dot(upstream, forward(p, x)) w.r.t. every parameter, added
/// into `grads` (which must be sized like p.values).
void backward(const EncoderParams& p, const ForwardCache& cache, std::span<const double> upstream,
              std::span<double> grads);
EncoderGrads backward(const EncoderParams& p, const FeatureSequence& x,
                      std::span<const double> upstream);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // relu pattern changed inside [-eps, +eps]
};

/// Central differences against backward(). Above `max_params` parameters a
/// seeded subsample is checked. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const EncoderParams& p, const FeatureSequence& x, double eps,
                           std::uint64_t seed = 0, std::size_t max_params = 10000);

inline constexpr double kGradCheckFloor = 1e-6;

/// "VTHP" checkpoint: version byte, config as LE u32s, weights as LE f64.
std::vector<std::uint8_t> serialize_params(const EncoderParams& p);
EncoderParams deserialize_params(std::span<const std::uint8_t> bytes);
void save_params(const EncoderParams& p, const std::string& path);
EncoderParams load_params(const std::string& path);

}  // namespace hashtrace
