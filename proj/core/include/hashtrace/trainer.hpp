#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hashtrace/dataset.hpp"
#include "hashtrace/encoder.hpp"
#include "hashtrace/loss.hpp"

namespace hashtrace {

enum class LossMode { kBoth, kIntraOnly, kInterOnly };
enum class InputNorm { kOff, kStandardize, kWhiten };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view name);

struct TrainConfig {
  std::size_t batch_groups = 8;  // triplet units per batch, from distinct groups
  std::size_t iterations = 500;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 10.0;  // global gradient norm cap
  std::uint64_t seed = 0;
  std::uint32_t k = 64;
  std::uint32_t T = 8;
  std::uint32_t E = 64;
  std::size_t stride = 1;
  Activation activation = Activation::kTanh;
  std::optional<Activation> hidden_activation;  // unset follows `activation`
  LossMode mode = LossMode::kBoth;
  /// Input transform folded into the embedding before the first step.
  /// Without whitening, the intra term keeps pulling every code toward the
  /// leading principal directions of the descriptors and centers merge.
  InputNorm input_norm = InputNorm::kWhiten;
  double input_scale_floor = 0.01;  // kStandardize: minimum stddev
  double whiten_floor = 0.03;       // kWhiten: eigenvalue floor relative to the largest

  void validate() const;
  EncoderConfig encoder_config() const;
};

/// Descriptors for every video of a GroupSet, loaded once. The last fake of
/// each group is held out for evaluation when the group has three or more.
class TrainingData {
 public:
  explicit TrainingData(GroupSet gs);

  const GroupSet& groups() const { return gs_; }
  const VideoFeatures& original(std::size_t g) const { return originals_[g]; }
  const VideoFeatures& fake(std::size_t g, std::size_t j) const { return fakes_[g][j]; }
  /// Fakes usable for training in group g (a prefix of its fake list).
  std::size_t training_fakes(std::size_t g) const;
  /// Index of the held-out fake of group g.
  std::size_t held_out_fake(std::size_t g) const { return gs_.groups[g].fakes.size() - 1; }

 private:
  GroupSet gs_;
  std::vector<VideoFeatures> originals_;
  std::vector<std::vector<VideoFeatures>> fakes_;
};

struct TripletUnit {
  std::uint32_t group_id = 0;
  std::size_t fake_1 = 0;  // indices into the group's fake list
  std::size_t fake_2 = 0;
  FeatureSequence original_clip;
  FeatureSequence fake_clip_1;
  FeatureSequence fake_clip_2;
};

/// Groups visited in a seeded permutation, reshuffled every epoch; a short
/// final batch is topped up from the start of the same permutation.
std::vector<std::uint32_t> batch_groups(std::size_t num_groups, std::size_t batch_size,
                                        std::uint64_t seed, std::size_t iter);
std::vector<TripletUnit> build_batch(const TrainingData& data, const TrainConfig& cfg,
                                     std::size_t iter);

/// Binarized codes one group produced this iteration.
struct GroupCodes {
  std::optional<HashCode> anchor;  // the original's code
  std::vector<HashCode> codes;     // includes the anchor
};
using CodesByGroup = std::map<std::uint32_t, GroupCodes>;

/// Re-votes every group present in `codes`; other groups keep `previous`.
CenterSet revote_centers(const CodesByGroup& codes, const CenterSet& previous);

struct TrainRecord {
  std::size_t iter = 0;
  double loss = 0.0;
  double inter_mean = 0.0;  // mean pairwise Hamming between centers
  double intra_mean = 0.0;  // mean Hamming of codes to their own center
  double mean_bit = 0.0;    // fraction of ones over all binarized codes
};
using TrainHistory = std::vector<TrainRecord>;

TrainRecord train_metrics(const CenterSet& centers, const CodesByGroup& codes);

struct FitResult {
  EncoderParams params;
  CenterSet centers;
  TrainHistory history;
};

FitResult fit(const TrainingData& data, const TrainConfig& cfg);

/// Per-dimension mean and standard deviation over all training frames.
struct InputStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};
InputStats input_stats(const TrainingData& data);

/// Rewrites the embedding so that forward(x) equals the original layer applied
/// to (x - mean) / scale.
void fold_input_normalization(EncoderParams& params, std::span<const double> mean, std::span<const double> scale);

struct Whitening {
  std::vector<double> mean;
  std::vector<double> transform;  // D x D, row-major
};
Whitening input_whitening(const TrainingData& data, double eig_floor);
void fold_input_transform(EncoderParams& params, const Whitening& w);

/// Seeded anchor clip used for center initialization of group g.
FeatureSequence anchor_clip(const TrainingData& data, std::size_t g, const TrainConfig& cfg);

/// `iter,loss,inter_mean,intra_mean,mean_bit` with round-trip precision.
std::string history_csv(const TrainHistory& history);

/// Adam state over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1, double beta2, double eps);
  void step(std::span<double> params, std::span<const double> grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace hashtrace
