#include "hashtrace/localizator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hashtrace {

namespace {

struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane luma_plane(const Image& img, int factor) {
  Plane p;
  p.w = img.width / factor;
  p.h = img.height / factor;
  p.v.assign(static_cast<std::size_t>(p.w) * p.h, 0.0);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      double s = 0.0;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) s += luminance(img, y * factor + dy, x * factor + dx);
      }
      p.v[static_cast<std::size_t>(y) * p.w + x] = s / (factor * factor);
    }
  }
  return p;
}

double sample(const Plane& p, double fy, double fx) {
  fy = std::clamp(fy, 0.0, static_cast<double>(p.h - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(p.w - 1));
  const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, p.h - 1), x1 = std::min(x0 + 1, p.w - 1);
  const double wy = fy - y0, wx = fx - x0;
  return (p.at(y0, x0) * (1 - wx) + p.at(y0, x1) * wx) * (1 - wy) +
         (p.at(y1, x0) * (1 - wx) + p.at(y1, x1) * wx) * wy;
}

// Offsets are in units of the plane's pixels.
double ncc(const Plane& fake, const Plane& orig, double scale, double dy, double dx) {
  const double cy = orig.h / 2.0, cx = orig.w / 2.0;
  const std::size_t n = fake.v.size();
  std::vector<double> warped(n);
  for (int y = 0; y < fake.h; ++y) {
    const double sy = cy + (y + 0.5 - fake.h / 2.0) / scale + dy - 0.5;
    for (int x = 0; x < fake.w; ++x) {
      const double sx = cx + (x + 0.5 - fake.w / 2.0) / scale + dx - 0.5;
      warped[static_cast<std::size_t>(y) * fake.w + x] = sample(orig, sy, sx);
    }
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += fake.v[i];
    mb += warped[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = fake.v[i] - ma, b = warped[i] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  if (saa <= 1e-12 || sbb <= 1e-12) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<std::size_t> sample_indices(std::size_t n) {
  std::vector<std::size_t> idx;
  if (n <= static_cast<std::size_t>(kAlignSamplePairs)) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (int i = 0; i < kAlignSamplePairs; ++i) {
    idx.push_back(static_cast<std::size_t>(std::lround(i * (n - 1) / double(kAlignSamplePairs - 1))));
  }
  return idx;
}

struct Pairs {
  std::vector<Plane> fake, orig;
  double mean_ncc(double scale, double dy, double dx) const {
    double s = 0.0;
    for (std::size_t i = 0; i < fake.size(); ++i) s += ncc(fake[i], orig[i], scale, dy, dx);
    return s / static_cast<double>(fake.size());
  }
};

}  // namespace

AlignmentSpec align(const Frames& fake, const Frames& original) {
  if (fake.empty() || original.empty()) throw std::invalid_argument("align: empty frame sequence");
  const std::size_t n = std::min(fake.size(), original.size());
  const auto idx = sample_indices(n);

  Pairs coarse, fine;
  const int factor = (fake.front().width >= 32 && fake.front().height >= 32) ? 4 : 1;
  for (std::size_t i : idx) {
    coarse.fake.push_back(luma_plane(fake[i], factor));
    coarse.orig.push_back(luma_plane(original[i], factor));
    fine.fake.push_back(luma_plane(fake[i], 1));
    fine.orig.push_back(luma_plane(original[i], 1));
  }

  const int qh = coarse.fake.front().h, qw = coarse.fake.front().w;
  const int ry = std::max(1, static_cast<int>(kAlignOffsetFraction * qh));
  const int rx = std::max(1, static_cast<int>(kAlignOffsetFraction * qw));
  const int steps = static_cast<int>(std::lround((kMaxAlignScale - kMinAlignScale) / kAlignScaleStep));

  // Identity first; any other candidate must beat it strictly.
  AlignmentSpec best;
  best.score = coarse.mean_ncc(1.0, 0, 0);
  for (int s = 0; s <= steps; ++s) {
    const double scale = (80 + 5 * s) / 100.0;
    for (int dy = -ry; dy <= ry; ++dy) {
      for (int dx = -rx; dx <= rx; ++dx) {
        const double score = coarse.mean_ncc(scale, dy, dx);
        if (score > best.score + 1e-12) best = {scale, dy, dx, score};
      }
    }
  }

  AlignmentSpec refined{best.scale, best.dy * factor, best.dx * factor, 0.0};
  refined.score = fine.mean_ncc(refined.scale, refined.dy, refined.dx);
  const int cy = refined.dy, cx = refined.dx;
  for (int dy = cy - factor + 1; dy <= cy + factor - 1; ++dy) {
    for (int dx = cx - factor + 1; dx <= cx + factor - 1; ++dx) {
      if (dy == cy && dx == cx) continue;
      const double score = fine.mean_ncc(refined.scale, dy, dx);
      if (score > refined.score + 1e-12) refined = {refined.scale, dy, dx, score};
    }
  }
  if (refined.score == 0.0) return AlignmentSpec{};
  return refined;
}

Image warp_to(const Image& original, const AlignmentSpec& spec, int out_w, int out_h) {
  const double inv = 1.0 / spec.scale;
  const double x0 = original.width / 2.0 + (0.5 - out_w / 2.0) * inv + spec.dx - 0.5;
  const double y0 = original.height / 2.0 + (0.5 - out_h / 2.0) * inv + spec.dy - 0.5;
  return resample_affine(original, out_w, out_h, x0, inv, y0, inv);
}

namespace {

Image morph(const Image& mask, int radius, bool dilation) {
  Image out(mask.width, mask.height, 1, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool v = !dilation;
      for (int dy = -radius; dy <= radius && v != dilation; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= mask.height) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= mask.width) continue;
          const bool set = mask.at(yy, xx) != 0;
          if (dilation && set) {
            v = true;
            break;
          }
          if (!dilation && !set) {
            v = false;
            break;
          }
        }
      }
      out.at(y, x) = v ? 255 : 0;
    }
  }
  return out;
}

}  // namespace

Image erode(const Image& mask, int radius) { return morph(mask, radius, false); }
Image dilate(const Image& mask, int radius) { return morph(mask, radius, true); }

Frames diff_mask(const Frames& fake, const Frames& original, const AlignmentSpec& spec, double tau,
                 int radius) {
  if (radius < 0) throw std::invalid_argument("diff_mask: radius must be >= 0");
  const std::size_t n = std::min(fake.size(), original.size());
  Frames masks;
  masks.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    const Image& a = fake[f];
    const Image warped = warp_to(original[f], spec, a.width, a.height);
    if (!warped.same_shape(a) || original[f].width != a.width || original[f].height != a.height) {
      throw std::invalid_argument("diff_mask: resolution mismatch at frame " + std::to_string(f));
    }
    Image m(a.width, a.height, 1, 0);
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
      int best = 0;
      for (int c = 0; c < a.channels; ++c) {
        best = std::max(best, std::abs(a.data[i * a.channels + c] - warped.data[i * a.channels + c]));
      }
      if (best / 255.0 > tau) m.data[i] = 255;
    }
    if (radius > 0) {
      m = dilate(erode(m, radius), radius);
      m = erode(dilate(m, radius), radius);
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

double frame_iou(const Image& pred, const Image& gt) {
  if (pred.width != gt.width || pred.height != gt.height || pred.channels != 1 || gt.channels != 1) {
    throw std::invalid_argument("iou: mask shape mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double miou(const Frames& pred, const Frames& gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("miou: frame count mismatch (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(gt.size()) + ")");
  }
  if (pred.empty()) throw std::invalid_argument("miou: no frames");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += frame_iou(pred[i], gt[i]);
  return s / static_cast<double>(pred.size());
}

}  // namespace hashtrace
