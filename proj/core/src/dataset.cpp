#include "hashtrace/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hashtrace/rng.hpp"

namespace hashtrace {

namespace fs = std::filesystem;

std::size_t GroupSet::n_fakes() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.fakes.size();
  return n;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string group_prefix(std::uint32_t id) { return "group " + std::to_string(id) + ": "; }

}  // namespace

GroupSet load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());

  struct Pending {
    std::vector<VideoRef> originals;
    std::vector<VideoRef> fakes;
  };
  std::map<std::uint32_t, Pending> by_group;
  const fs::path root = path.parent_path();

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != 4) throw std::runtime_error(where + "expected 4 tab-separated fields");
    std::uint32_t id = 0;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(fields[0], &used);
      if (used != fields[0].size() || v < 0 || v > 0xffffffffLL) throw std::out_of_range("id");
      id = static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
      throw std::runtime_error(where + "invalid group_id '" + fields[0] + "'");
    }
    VideoRef ref;
    ref.relative_path = fields[2];
    ref.path = root / fields[2];
    ref.label = fields[3];
    if (fields[1] == "original") {
      by_group[id].originals.push_back(std::move(ref));
    } else if (fields[1] == "fake") {
      by_group[id].fakes.push_back(std::move(ref));
    } else {
      throw std::runtime_error(where + "role must be 'original' or 'fake', got '" + fields[1] +
                               "'");
    }
  }

  GroupSet gs;
  gs.root = root;
  std::uint32_t expected = 0;
  for (auto& [id, pending] : by_group) {
    const std::string gp = group_prefix(id);
    if (id != expected) {
      throw std::runtime_error("group ids must be dense from 0: missing group " +
                               std::to_string(expected));
    }
    ++expected;
    if (pending.originals.empty()) throw std::runtime_error(gp + "no original");
    if (pending.originals.size() > 1) throw std::runtime_error(gp + "duplicate group_id (more than one original)");
    if (pending.fakes.empty()) throw std::runtime_error(gp + "no fakes");
    if (pending.fakes.size() < 2) throw std::runtime_error(gp + "needs at least 2 fakes");

    auto resolve = [&](VideoRef& ref) {
      if (!fs::is_directory(ref.path)) {
        throw std::runtime_error(gp + "missing frame directory " + ref.path.string());
      }
      ref.frame_count = list_frames(ref.path).size();
      if (ref.frame_count == 0) {
        throw std::runtime_error(gp + "no frame_*.ppm files in " + ref.path.string());
      }
    };
    Group g;
    g.group_id = id;
    g.original = std::move(pending.originals.front());
    resolve(g.original);
    for (auto& f : pending.fakes) {
      resolve(f);
      g.fakes.push_back(std::move(f));
    }
    gs.groups.push_back(std::move(g));
  }
  if (gs.groups.empty()) throw std::runtime_error("manifest " + path.string() + " has no groups");
  return gs;
}

void write_manifest(const fs::path& path, const GroupSet& gs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& g : gs.groups) {
    out << g.group_id << "\toriginal\t" << g.original.relative_path << '\t' << g.original.label
        << '\n';
    for (const auto& f : g.fakes) {
      out << g.group_id << "\tfake\t" << f.relative_path << '\t' << f.label << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<double> extract_descriptor(const Image& frame) {
  if (frame.channels != 3 || frame.width < kGrid || frame.height < kGrid) {
    throw std::invalid_argument("extract_descriptor: need an RGB frame of at least 8x8");
  }
  std::vector<double> d(kDescriptorDim, 0.0);
  for (int by = 0; by < kGrid; ++by) {
    const int y0 = by * frame.height / kGrid;
    const int y1 = (by + 1) * frame.height / kGrid;
    for (int bx = 0; bx < kGrid; ++bx) {
      const int x0 = bx * frame.width / kGrid;
      const int x1 = (bx + 1) * frame.width / kGrid;
      double sum = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) sum += luminance(frame, y, x);
      }
      d[by * kGrid + bx] = sum / ((y1 - y0) * (x1 - x0));
    }
  }
  std::vector<std::size_t> counts(3 * kHistBins, 0);
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const int v = frame.data[i * 3 + c];
      ++counts[c * kHistBins + v * kHistBins / 256];
    }
  }
  const double n = static_cast<double>(frame.pixel_count());
  for (std::size_t b = 0; b < counts.size(); ++b) {
    d[kGrid * kGrid + b] = static_cast<double>(counts[b]) / n;
  }
  return d;
}

VideoFeatures describe_frames(const Frames& frames) {
  VideoFeatures vf;
  vf.frames.reserve(frames.size());
  for (const auto& f : frames) vf.frames.push_back(extract_descriptor(f));
  return vf;
}

VideoFeatures describe_video(const VideoRef& video) {
  return describe_frames(read_frames(video.path));
}

std::size_t clip_start(std::size_t frame_count, std::size_t T, std::size_t stride,
                       std::uint64_t seed) {
  if (T == 0 || stride == 0) throw std::invalid_argument("clip length and stride must be positive");
  const std::size_t span = (T - 1) * stride + 1;
  if (frame_count < span) {
    throw std::invalid_argument("video has " + std::to_string(frame_count) +
                                " frames; clip needs " + std::to_string(span));
  }
  Rng rng(seed);
  return static_cast<std::size_t>(rng.below(frame_count - span + 1));
}

FeatureSequence sample_clip(const VideoFeatures& video, std::size_t T, std::size_t stride,
                            std::uint64_t seed) {
  const std::size_t start = clip_start(video.frames.size(), T, stride, seed);
  const std::size_t D = video.frames.front().size();
  FeatureSequence seq(T, D);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& src = video.frames[start + t * stride];
    std::copy(src.begin(), src.end(), seq.row(t).begin());
  }
  return seq;
}

FeatureSequence sample_clip(const VideoRef& video, std::size_t T, std::size_t stride,
                            std::uint64_t seed) {
  const auto paths = list_frames(video.path);
  const std::size_t start = clip_start(paths.size(), T, stride, seed);
  FeatureSequence seq(T, kDescriptorDim);
  for (std::size_t t = 0; t < T; ++t) {
    const auto d = extract_descriptor(read_pnm(paths[start + t * stride]));
    std::copy(d.begin(), d.end(), seq.row(t).begin());
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Perturbations

std::string Perturbation::name() const {
  switch (kind) {
    case PerturbKind::kNone:
      return "original";
    case PerturbKind::kDetail:
      return "detail";
    case PerturbKind::kGaussianBlur:
      return "gaussian_blur";
    case PerturbKind::kBoxBlur:
      return "box_blur";
    case PerturbKind::kMedian:
      return "median";
    case PerturbKind::kCrop:
      return "crop";
  }
  return "unknown";
}

Perturbation parse_perturbation(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty()) throw std::invalid_argument("empty perturbation");
  auto num = [&](std::size_t i) {
    try {
      std::size_t used = 0;
      const double v = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("bad perturbation parameter '" + parts[i] + "' in '" + text +
                                  "'");
    }
  };
  auto kernel = [&](std::size_t i) {
    const double v = num(i);
    if (v != std::floor(v)) throw std::invalid_argument("kernel size must be an integer");
    return static_cast<int>(v);
  };
  Perturbation p;
  const std::string& kind = parts[0];
  std::size_t max_args = 0;
  if (kind == "none" || kind == "original") {
    p.kind = PerturbKind::kNone;
  } else if (kind == "detail") {
    p.kind = PerturbKind::kDetail;
    max_args = 1;
    if (parts.size() > 1) p.amount = num(1);
  } else if (kind == "gaussian_blur") {
    p.kind = PerturbKind::kGaussianBlur;
    max_args = 2;
    if (parts.size() > 1) p.kernel = kernel(1);
    if (parts.size() > 2) p.sigma = num(2);
  } else if (kind == "box_blur" || kind == "blur") {
    p.kind = PerturbKind::kBoxBlur;
    max_args = 1;
    if (parts.size() > 1) p.kernel = kernel(1);
  } else if (kind == "median") {
    p.kind = PerturbKind::kMedian;
    max_args = 1;
    if (parts.size() > 1) p.kernel = kernel(1);
  } else if (kind == "crop") {
    p.kind = PerturbKind::kCrop;
    max_args = 1;
    if (parts.size() > 1) p.fraction = num(1);
  } else {
    throw std::invalid_argument("unknown perturbation '" + kind + "'");
  }
  if (parts.size() > max_args + 1) {
    throw std::invalid_argument("too many parameters for perturbation '" + kind + "'");
  }
  validate(p);
  return p;
}

void validate(const Perturbation& p) {
  switch (p.kind) {
    case PerturbKind::kNone:
      return;
    case PerturbKind::kDetail:
      if (!(p.amount > 0.0 && p.amount <= 1.0)) {
        throw std::invalid_argument("detail amount must be in (0, 1]");
      }
      return;
    case PerturbKind::kGaussianBlur:
      if (!(p.sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
      [[fallthrough]];
    case PerturbKind::kBoxBlur:
    case PerturbKind::kMedian:
      if (p.kernel < 3 || p.kernel % 2 == 0) {
        throw std::invalid_argument("kernel size must be odd and >= 3, got " +
                                    std::to_string(p.kernel));
      }
      return;
    case PerturbKind::kCrop:
      if (!(p.fraction > 0.0 && p.fraction <= 0.5)) {
        throw std::invalid_argument("crop fraction must be in (0, 0.5]");
      }
      return;
  }
}

std::vector<double> gaussian_taps(int kernel, double sigma) {
  std::vector<double> taps(kernel);
  const int r = kernel / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += taps[i + r];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

namespace {

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Separable convolution with edge clamping; rounds once at the end.
Image convolve_separable(const Image& src, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  const int W = src.width, H = src.height, C = src.channels;
  std::vector<double> tmp(static_cast<std::size_t>(W) * H * C, 0.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += taps[i + r] * src.at(y, std::clamp(x + i, 0, W - 1), c);
        }
        tmp[(static_cast<std::size_t>(y) * W + x) * C + c] = acc;
      }
    }
  }
  Image out(W, H, C);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += taps[i + r] * tmp[(static_cast<std::size_t>(std::clamp(y + i, 0, H - 1)) * W + x) * C + c];
        }
        out.at(y, x, c) = to_u8(acc);
      }
    }
  }
  return out;
}

Image median_filter(const Image& src, int kernel) {
  const int r = kernel / 2;
  Image out(src.width, src.height, src.channels);
  std::vector<std::uint8_t> window(static_cast<std::size_t>(kernel) * kernel);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = std::clamp(y + dy, 0, src.height - 1);
          for (int dx = -r; dx <= r; ++dx) {
            window[n++] = src.at(yy, std::clamp(x + dx, 0, src.width - 1), c);
          }
        }
        std::nth_element(window.begin(), window.begin() + n / 2, window.begin() + n);
        out.at(y, x, c) = window[n / 2];
      }
    }
  }
  return out;
}

// 3x3 cross sharpening: center 1 + 4a, each 4-neighbour -a.
Image detail_filter(const Image& src, double amount) {
  Image out(src.width, src.height, src.channels);
  const int W = src.width, H = src.height;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        const double center = src.at(y, x, c);
        const double nb = src.at(std::max(y - 1, 0), x, c) + src.at(std::min(y + 1, H - 1), x, c) +
                          src.at(y, std::max(x - 1, 0), c) + src.at(y, std::min(x + 1, W - 1), c);
        out.at(y, x, c) = to_u8((1.0 + 4.0 * amount) * center - amount * nb);
      }
    }
  }
  return out;
}

Image crop_rescale(const Image& src, double fraction) {
  const double keep = 1.0 - 2.0 * fraction;
  const double x0 = fraction * src.width + 0.5 * keep - 0.5;
  const double y0 = fraction * src.height + 0.5 * keep - 0.5;
  return resample_affine(src, src.width, src.height, x0, keep, y0, keep);
}

}  // namespace

Image perturb_frame(const Image& frame, const Perturbation& p) {
  validate(p);
  switch (p.kind) {
    case PerturbKind::kNone:
      return frame;
    case PerturbKind::kDetail:
      return detail_filter(frame, p.amount);
    case PerturbKind::kGaussianBlur:
      return convolve_separable(frame, gaussian_taps(p.kernel, p.sigma));
    case PerturbKind::kBoxBlur:
      return convolve_separable(frame, std::vector<double>(p.kernel, 1.0 / p.kernel));
    case PerturbKind::kMedian:
      return median_filter(frame, p.kernel);
    case PerturbKind::kCrop:
      return crop_rescale(frame, p.fraction);
  }
  return frame;
}

Frames perturb(const Frames& frames, const Perturbation& p) {
  validate(p);
  Frames out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(perturb_frame(f, p));
  return out;
}

// ---------------------------------------------------------------------------
// Splicing

SpliceResult synth_splice(const Frames& host, const SpliceSpec& spec) {
  if (!(spec.scale > 0.0)) throw std::invalid_argument("splice scale must be positive");
  if (spec.object_frames.size() != spec.object_masks.size()) {
    throw std::invalid_argument("splice object frames and masks differ in count");
  }
  const std::size_t m_obj = spec.object_frames.size();
  if (m_obj >= host.size()) {
    throw std::invalid_argument("splice object must have fewer frames than the host");
  }
  SpliceResult result;
  result.frames = host;
  result.masks.reserve(host.size());
  for (const auto& h : host) result.masks.emplace_back(h.width, h.height, 1, 0);

  for (std::size_t f = 0; f < m_obj; ++f) {
    const Image& obj = spec.object_frames[f];
    const Image& alpha = spec.object_masks[f];
    if (obj.width != alpha.width || obj.height != alpha.height || alpha.channels != 1) {
      throw std::invalid_argument("splice object frame and mask shapes differ");
    }
    const int sw = std::max(1, static_cast<int>(std::lround(obj.width * spec.scale)));
    const int sh = std::max(1, static_cast<int>(std::lround(obj.height * spec.scale)));
    Image& out = result.frames[f];
    if (spec.row < 0 || spec.col < 0 || spec.row + sh > out.height || spec.col + sw > out.width) {
      throw std::invalid_argument("scaled splice object (" + std::to_string(sw) + "x" +
                                  std::to_string(sh) + " at " + std::to_string(spec.row) + "," +
                                  std::to_string(spec.col) + ") is out of bounds");
    }
    Image& mask = result.masks[f];
    for (int y = 0; y < sh; ++y) {
      const int sy = std::min(obj.height - 1, static_cast<int>((y + 0.5) / spec.scale));
      for (int x = 0; x < sw; ++x) {
        const int sx = std::min(obj.width - 1, static_cast<int>((x + 0.5) / spec.scale));
        if (alpha.at(sy, sx) == 0) continue;
        for (int c = 0; c < 3; ++c) out.at(spec.row + y, spec.col + x, c) = obj.at(sy, sx, c);
        mask.at(spec.row + y, spec.col + x) = 255;
      }
    }
  }
  return result;
}

}  // namespace hashtrace
