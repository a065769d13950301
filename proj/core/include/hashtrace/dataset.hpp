#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hashtrace/image.hpp"

namespace hashtrace {

struct VideoRef {
  std::filesystem::path path;  // absolute frame directory
  std::string relative_path;   // as written in the manifest
  std::size_t frame_count = 0;
  std::string label;
};

struct Group {
  std::uint32_t group_id = 0;
  VideoRef original;
  std::vector<VideoRef> fakes;
};

/// One original plus at least two fakes per group; ids dense from 0.
struct GroupSet {
  std::filesystem::path root;
  std::vector<Group> groups;

  std::size_t m() const { return groups.size(); }
  std::size_t n_fakes() const;
  std::size_t z() const { return m() + n_fakes(); }
};

inline constexpr const char* kManifestName = "manifest.tsv";

/// Parses `group_id<TAB>role<TAB>relative_path<TAB>label` rows. Paths resolve
/// against the manifest's directory. Throws std::runtime_error naming the
/// offending group or line.
GroupSet load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const GroupSet& gs);

// Descriptor layout: 8x8 block-mean luminance grid, then one 16-bin
// normalized histogram per RGB channel.
inline constexpr int kGrid = 8;
inline constexpr int kHistBins = 16;
inline constexpr std::size_t kDescriptorDim = kGrid * kGrid + 3 * kHistBins;

std::vector<double> extract_descriptor(const Image& frame);

/// T x D row-major feature matrix for one clip.
struct FeatureSequence {
  std::size_t T = 0;
  std::size_t D = 0;
  std::vector<double> values;

  FeatureSequence() = default;
  FeatureSequence(std::size_t t, std::size_t d) : T(t), D(d), values(t * d, 0.0) {}

  std::span<double> row(std::size_t t) { return {values.data() + t * D, D}; }
  std::span<const double> row(std::size_t t) const { return {values.data() + t * D, D}; }
};

/// Per-frame descriptors of one video, computed once.
struct VideoFeatures {
  std::vector<std::vector<double>> frames;
};

VideoFeatures describe_frames(const Frames& frames);
VideoFeatures describe_video(const VideoRef& video);

/// Seeded uniform start offset for a T-frame window at `stride`.
/// Throws if frame_count < (T - 1) * stride + 1.
std::size_t clip_start(std::size_t frame_count, std::size_t T, std::size_t stride,
                       std::uint64_t seed);

FeatureSequence sample_clip(const VideoFeatures& video, std::size_t T, std::size_t stride,
                            std::uint64_t seed);
/// Reads frames from disk; same window choice as the in-memory overload.
FeatureSequence sample_clip(const VideoRef& video, std::size_t T, std::size_t stride,
                            std::uint64_t seed);

enum class PerturbKind { kNone, kDetail, kGaussianBlur, kBoxBlur, kMedian, kCrop };

/// One frame distortion. Only the fields relevant to `kind` are used.
struct Perturbation {
  PerturbKind kind = PerturbKind::kNone;
  int kernel = 5;          // blur / median window, odd >= 3
  double sigma = 1.0;      // gaussian_blur
  double fraction = 0.3;   // crop: border removed per side, in (0, 0.5]
  double amount = 1.0 / 6; // detail: sharpening weight, in (0, 1]

  std::string name() const;
};

/// Accepts `none`, `detail[:amount]`, `gaussian_blur[:kernel[:sigma]]`,
/// `box_blur[:kernel]`, `median[:kernel]`, `crop[:fraction]`.
Perturbation parse_perturbation(const std::string& text);
void validate(const Perturbation& p);

Image perturb_frame(const Image& frame, const Perturbation& p);
Frames perturb(const Frames& frames, const Perturbation& p);

/// Normalized discrete Gaussian taps, length `kernel`.
std::vector<double> gaussian_taps(int kernel, double sigma);

struct SpliceSpec {
  double scale = 1.0;
  int row = 0;  // top-left of the scaled object in host coordinates
  int col = 0;
  Frames object_frames;  // RGB
  Frames object_masks;   // single channel, nonzero = opaque
};

struct SpliceResult {
  Frames frames;  // host length; the first m_obj frames carry the object
  Frames masks;   // host length, 255 = composited pixel
};

SpliceResult synth_splice(const Frames& host, const SpliceSpec& spec);

}  // namespace hashtrace
