#pragma once

#include <span>

#include "hashtrace/image.hpp"

namespace hashtrace {

/// Maps fake pixel (y, x) to original coordinates
///   cy + (y + 0.5 - cy) / scale + dy   (likewise for x),
/// i.e. a zoom about the frame centre followed by a shift.
struct AlignmentSpec {
  double scale = 1.0;
  int dy = 0;
  int dx = 0;
  double score = 0.0;  // mean normalized cross-correlation
};

inline constexpr double kMinAlignScale = 0.8;
inline constexpr double kMaxAlignScale = 1.25;
inline constexpr double kAlignScaleStep = 0.05;
inline constexpr double kAlignOffsetFraction = 0.1;
inline constexpr int kAlignSamplePairs = 5;

/// Exhaustive scale/offset search at quarter resolution, then a full
/// resolution offset refinement around the winner. Constant frames yield the
/// identity with score 0.
AlignmentSpec align(const Frames& fake, const Frames& original);

/// Original resampled into the fake's frame under `spec`.
Image warp_to(const Image& original, const AlignmentSpec& spec, int out_w, int out_h);

/// Per-pixel max-channel |fake - warped original| / 255 > tau, followed by a
/// square-kernel morphological open then close of radius `radius`.
Frames diff_mask(const Frames& fake, const Frames& original, const AlignmentSpec& spec,
                 double tau = 0.08, int radius = 1);

Image erode(const Image& mask, int radius);
Image dilate(const Image& mask, int radius);

/// |pred & gt| / |pred | gt|, 1.0 when both are empty. Nonzero pixels are set.
double frame_iou(const Image& pred, const Image& gt);
/// Mean of frame_iou over frames.
double miou(const Frames& pred, const Frames& gt);

}  // namespace hashtrace
