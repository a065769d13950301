#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hashtrace {

/// Interleaved 8-bit raster, row-major. channels is 3 (RGB) or 1 (gray/mask).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

using Frames = std::vector<Image>;

/// Binary P6 (RGB) or P5 (gray) with maxval 255.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& img);

/// Sorted lexicographically by filename; matches `<prefix>*.<ext>`.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir,
                                               const std::string& prefix = "frame_",
                                               const std::string& ext = ".ppm");
Frames read_frames(const std::filesystem::path& dir, const std::string& prefix = "frame_",
                   const std::string& ext = ".ppm");

/// `<prefix>%06d<ext>` naming used for frame and mask files.
std::string frame_name(const std::string& prefix, std::size_t index, const std::string& ext);

}  // namespace hashtrace

namespace hashtrace {

/// Bilinear resampling onto an out_w x out_h grid where output pixel (x, y)
/// samples the source at (x0 + x * sx, y0 + y * sy) in pixel-center
/// coordinates. Out-of-range samples clamp to the nearest edge.
Image resample_affine(const Image& src, int out_w, int out_h, double x0, double sx, double y0,
                      double sy);

/// Rec.601 luma of one pixel in [0, 1]; exact 0 for black and 1 for white.
inline double luminance(const Image& img, int y, int x) {
  if (img.channels == 1) return img.at(y, x) / 255.0;
  const int num = 299 * img.at(y, x, 0) + 587 * img.at(y, x, 1) + 114 * img.at(y, x, 2);
  return num / 255000.0;
}

}  // namespace hashtrace
