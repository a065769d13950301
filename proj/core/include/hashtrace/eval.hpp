#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hashtrace/dataset.hpp"
#include "hashtrace/encoder.hpp"
#include "hashtrace/index.hpp"
#include "hashtrace/trainer.hpp"

namespace hashtrace {

struct LabeledClip {
  FeatureSequence clip;
  std::uint32_t group_id = 0;
  std::string label;
};

/// Raw frames of one query video with its true group.
struct QueryVideo {
  std::uint32_t group_id = 0;
  std::string label;
  Frames frames;
};

inline constexpr std::size_t kClipsPerQueryVideo = 4;

/// The held-out (last) fake of every group.
std::vector<QueryVideo> load_held_out_videos(const GroupSet& gs);
std::vector<QueryVideo> load_original_videos(const GroupSet& gs);

/// `clips_per_video` seeded clips per video after applying `perturbation`.
/// Clip windows depend only on (seed, group, clip number), never on the
/// perturbation.
std::vector<LabeledClip> make_queries(std::span<const QueryVideo> videos, const Perturbation& perturbation,
                                      std::size_t T, std::size_t stride, std::size_t clips_per_video,
                                      std::uint64_t seed);

std::vector<GroupMeta> group_meta(const GroupSet& gs);

HashCode encode(const EncoderParams& params, const FeatureSequence& clip);

double top1_accuracy(const TraceIndex& idx, const EncoderParams& params,
                     std::span<const LabeledClip> queries);

struct EvalRow {
  std::string condition;
  std::size_t k = 0;
  double accuracy = 0.0;
  double mean_distance = 0.0;
  std::size_t queries = 0;
};

struct ConfusionRow {
  std::string condition;
  std::string query_label;
  std::uint32_t true_group = 0;
  std::uint32_t traced_group = 0;
  std::size_t distance = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<ConfusionRow> confusion;
};

EvalRow evaluate(const TraceIndex& idx, const EncoderParams& params, std::span<const LabeledClip> queries,
                 const std::string& condition, std::vector<ConfusionRow>* confusion = nullptr);

struct QueryOptions {
  std::size_t stride = 1;
  std::size_t clips_per_video = kClipsPerQueryVideo;
  std::uint64_t seed = 0;
};

/// One row per perturbation, all from the same checkpoint and index.
EvalReport robustness_suite(const TraceIndex& idx, const EncoderParams& params,
                            std::span<const QueryVideo> videos, std::span<const Perturbation> perturbations,
                            const QueryOptions& opts = {});

/// The perturbation rows of the robustness table.
std::vector<Perturbation> default_perturbations();

struct AblationResult {
  LossMode mode = LossMode::kBoth;
  Activation activation = Activation::kTanh;
  TrainHistory history;
  CenterSet centers;
  double accuracy = 0.0;  // held-out Top-1
};

std::vector<AblationResult> ablation_run(const TrainingData& data, const TrainConfig& base, LossMode mode,
                                         std::span<const Activation> activations,
                                         std::span<const QueryVideo> held_out, const QueryOptions& opts = {});

/// Averages the last `window` records (or all, if fewer).
TrainRecord tail_mean(const TrainHistory& history, std::size_t window);

/// Writes robustness.csv (perturbation,k,accuracy), one
/// ablation_<mode>_<act>.csv history per run and ablation_results.csv.
/// Returns the files written, in write order.
std::vector<std::filesystem::path> report_emit(const std::filesystem::path& out_dir, const EvalReport* robustness,
                                               std::span<const AblationResult> ablations);

/// Condenses the CSVs found in `in_dir` into robustness_summary.csv and
/// ablation_summary.csv under `out_dir`.
std::vector<std::filesystem::path> report_summarize(const std::filesystem::path& in_dir,
                                                    const std::filesystem::path& out_dir);

}  // namespace hashtrace
