#include "hashtrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hashtrace {

namespace fs = std::filesystem;

namespace {

std::array<double, 3> random_color(Rng& rng, double lo = 20.0, double hi = 235.0) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

SceneParams::Shape random_shape(Rng& rng) {
  SceneParams::Shape s;
  s.circle = rng.below(2) == 0;
  s.color = random_color(rng);
  s.radius = rng.uniform(0.08, 0.18);
  s.x = rng.uniform(0.2, 0.8);
  s.y = rng.uniform(0.2, 0.8);
  s.vx = rng.uniform(-0.03, 0.03);
  s.vy = rng.uniform(-0.03, 0.03);
  return s;
}

// Triangle-wave reflection into [lo, hi].
double bounce(double p, double lo, double hi) {
  const double span = hi - lo;
  double t = std::fmod(p - lo, 2.0 * span);
  if (t < 0) t += 2.0 * span;
  return lo + (t <= span ? t : 2.0 * span - t);
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

struct Placed {
  const SceneParams::Shape* shape;
  double cx, cy;
};

bool inside(const Placed& p, double u, double v) {
  const double du = u - p.cx, dv = v - p.cy;
  const double r = p.shape->radius;
  if (p.shape->circle) return du * du + dv * dv <= r * r;
  return std::abs(du) <= r && std::abs(dv) <= 0.7 * r;
}

Image render_with(const SceneParams& scene, int frame, int size,
                  const std::vector<SceneParams::Shape>& shapes) {
  Image img(size, size, 3);
  std::vector<Placed> placed;
  for (const auto& s : shapes) {
    placed.push_back({&s, bounce(s.x + s.vx * frame, s.radius, 1.0 - s.radius),
                      bounce(s.y + s.vy * frame, s.radius, 1.0 - s.radius)});
  }
  const double gc = std::cos(scene.gradient_angle), gs = std::sin(scene.gradient_angle);
  const double sc = std::cos(scene.stripe_angle), ss = std::sin(scene.stripe_angle);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (int y = 0; y < size; ++y) {
    const double v = (y + 0.5) / size;
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size;
      const double t = std::clamp((u - 0.5) * gc + (v - 0.5) * gs + 0.5, 0.0, 1.0);
      const double stripe =
          scene.stripe_amp *
          std::sin(kTwoPi * (scene.stripe_freq * (u * sc + v * ss) + scene.stripe_speed * frame));
      std::array<double, 3> c;
      for (int ch = 0; ch < 3; ++ch) c[ch] = scene.bg_a[ch] * (1 - t) + scene.bg_b[ch] * t + stripe;
      for (const auto& p : placed) {
        if (inside(p, u, v)) {
          const double shade = 0.85 + 0.15 * (1.0 - std::hypot(u - p.cx, v - p.cy) / (1.5 * p.shape->radius));
          for (int ch = 0; ch < 3; ++ch) c[ch] = p.shape->color[ch] * shade;
        }
      }
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = to_u8(c[ch]);
    }
  }
  return img;
}

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
};

PixelRect edit_rect(const EditParams& e, int frame, int size) {
  const double x = bounce(e.x + e.vx * frame, 0.0, 1.0 - e.w);
  const double y = bounce(e.y + e.vy * frame, 0.0, 1.0 - e.h);
  auto px = [size](double f) { return std::clamp(static_cast<int>(std::lround(f * size)), 0, size); };
  return {px(x), px(y), px(x + e.w), px(y + e.h)};
}

}  // namespace

SceneParams random_scene(Rng& rng) {
  SceneParams s;
  s.bg_a = random_color(rng);
  s.bg_b = random_color(rng);
  s.gradient_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.stripe_freq = rng.uniform(1.0, 6.0);
  s.stripe_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.stripe_amp = rng.uniform(5.0, 35.0);
  s.stripe_speed = rng.uniform(-0.1, 0.1);
  const int n = rng.range(2, 4);
  for (int i = 0; i < n; ++i) s.shapes.push_back(random_shape(rng));
  return s;
}

Image render_scene(const SceneParams& scene, int frame, int size) {
  return render_with(scene, frame, size, scene.shapes);
}

EditParams random_edit(Rng& rng, EditKind kind, const SceneParams& scene) {
  EditParams e;
  e.kind = kind;
  e.w = rng.uniform(0.15, 0.5);
  e.h = rng.uniform(0.15, 0.5);
  e.x = rng.uniform(0.0, 1.0 - e.w);
  e.y = rng.uniform(0.0, 1.0 - e.h);
  e.vx = rng.uniform(-0.01, 0.01);
  e.vy = rng.uniform(-0.01, 0.01);
  e.shape = static_cast<std::size_t>(rng.below(scene.shapes.size()));
  e.replacement = scene.shapes[e.shape];
  e.replacement.circle = !e.replacement.circle;
  e.replacement.color = random_color(rng);
  e.replacement.radius = std::clamp(e.replacement.radius * rng.uniform(0.9, 1.4), 0.08, 0.25);
  return e;
}

Image render_fake(const SceneParams& scene, const EditParams& edit, int frame, int size) {
  if (edit.kind == EditKind::kObjectSwap) {
    auto shapes = scene.shapes;
    shapes[edit.shape] = edit.replacement;
    return render_with(scene, frame, size, shapes);
  }
  Image img = render_scene(scene, frame, size);
  const PixelRect r = edit_rect(edit, frame, size);
  if (r.x1 <= r.x0 || r.y1 <= r.y0) return img;
  if (edit.kind == EditKind::kRecolor) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const std::uint8_t red = img.at(y, x, 0), green = img.at(y, x, 1), blue = img.at(y, x, 2);
        img.at(y, x, 0) = blue;
        img.at(y, x, 1) = red;
        img.at(y, x, 2) = green;
      }
    }
  } else {
    // Flat fill with the mean colour of the region border.
    std::array<double, 3> sum{};
    int count = 0;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        if (y != r.y0 && y != r.y1 - 1 && x != r.x0 && x != r.x1 - 1) continue;
        for (int c = 0; c < 3; ++c) sum[c] += img.at(y, x, c);
        ++count;
      }
    }
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = to_u8(sum[c] / count);
      }
    }
  }
  return img;
}

Image diff_mask_exact(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("diff_mask_exact: shape mismatch");
  Image mask(a.width, a.height, 1, 0);
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    for (int c = 0; c < a.channels; ++c) {
      if (a.data[i * a.channels + c] != b.data[i * b.channels + c]) {
        mask.data[i] = 255;
        break;
      }
    }
  }
  return mask;
}

namespace {

double coverage(const Image& mask) {
  std::size_t n = 0;
  for (auto v : mask.data) n += v != 0;
  return static_cast<double>(n) / static_cast<double>(mask.pixel_count());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("output directory not writable: " + dir.string() +
                             (ec ? " (" + ec.message() + ")" : ""));
  }
}

std::string group_dir_name(int g) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "g%03d", g);
  return buf;
}

std::string fake_dir_name(int j) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "fake_%02d", j);
  return buf;
}

}  // namespace

GroupSet gen_synthetic_dataset(const SynthConfig& cfg, const fs::path& out) {
  if (cfg.num_groups < 2) throw std::invalid_argument("gen-data: need at least 2 groups");
  if (cfg.fakes_per_group < 2) throw std::invalid_argument("gen-data: need at least 2 fakes per group");
  if (cfg.frames < 1) throw std::invalid_argument("gen-data: need at least 1 frame");
  if (cfg.size < 16) throw std::invalid_argument("gen-data: frame size must be >= 16");
  ensure_dir(out);

  // Originals first, so distinctness can be checked before anything is written.
  std::vector<SceneParams> scenes;
  std::vector<Frames> originals;
  std::vector<VideoFeatures> features;
  for (int g = 0; g < cfg.num_groups; ++g) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt >= 100) throw std::runtime_error("gen-data: could not draw a distinct original");
      Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(g), 1000 + attempt));
      SceneParams scene = random_scene(rng);
      Frames frames;
      for (int f = 0; f < cfg.frames; ++f) frames.push_back(render_scene(scene, f, cfg.size));
      VideoFeatures vf = describe_frames(frames);
      bool distinct = true;
      for (const auto& other : features) {
        for (const auto& a : vf.frames) {
          for (const auto& b : other.frames) {
            if (a == b) distinct = false;
          }
        }
      }
      if (!distinct) continue;
      scenes.push_back(std::move(scene));
      originals.push_back(std::move(frames));
      features.push_back(std::move(vf));
      break;
    }
  }

  GroupSet gs;
  gs.root = out;
  for (int g = 0; g < cfg.num_groups; ++g) {
    const std::string gdir = group_dir_name(g);
    Group group;
    group.group_id = static_cast<std::uint32_t>(g);
    group.original.relative_path = gdir + "/original";
    group.original.path = out / group.original.relative_path;
    group.original.label = gdir + "_original";
    group.original.frame_count = static_cast<std::size_t>(cfg.frames);
    ensure_dir(group.original.path);
    for (int f = 0; f < cfg.frames; ++f) {
      write_pnm(group.original.path / frame_name("frame_", f, ".ppm"), originals[g][f]);
    }

    for (int j = 0; j < cfg.fakes_per_group; ++j) {
      const auto kind = static_cast<EditKind>((g + j) % 3);
      Frames fake_frames, masks;
      for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt >= 200) {
          throw std::runtime_error("gen-data: group " + std::to_string(g) +
                                   ": could not draw an edit within coverage bounds");
        }
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(g), 2000 + 1000 * j + attempt));
        const EditParams edit = random_edit(rng, kind, scenes[g]);
        fake_frames.clear();
        masks.clear();
        bool ok = true;
        for (int f = 0; f < cfg.frames && ok; ++f) {
          Image fake = render_fake(scenes[g], edit, f, cfg.size);
          Image mask = diff_mask_exact(fake, originals[g][f]);
          const double cov = coverage(mask);
          ok = cov >= kMinEditCoverage && cov <= kMaxEditCoverage;
          fake_frames.push_back(std::move(fake));
          masks.push_back(std::move(mask));
        }
        if (ok) break;
      }
      VideoRef ref;
      ref.relative_path = gdir + "/" + fake_dir_name(j);
      ref.path = out / ref.relative_path;
      ref.label = gdir + "_" + fake_dir_name(j);
      ref.frame_count = static_cast<std::size_t>(cfg.frames);
      ensure_dir(ref.path);
      for (int f = 0; f < cfg.frames; ++f) {
        write_pnm(ref.path / frame_name("frame_", f, ".ppm"), fake_frames[f]);
        write_pnm(ref.path / frame_name("mask_", f, ".pgm"), masks[f]);
      }
      group.fakes.push_back(std::move(ref));
    }
    gs.groups.push_back(std::move(group));
  }
  write_manifest(out / kManifestName, gs);
  return gs;
}

SpliceFixture make_splice_fixture(std::uint64_t seed, int size, int frames, double min_diff) {
  if (frames < 2) throw std::invalid_argument("splice fixture needs at least 2 frames");
  Rng rng(mix_seed(seed, 0x5911ce));
  SpliceFixture fx;
  const SceneParams scene = random_scene(rng);
  for (int f = 0; f < frames; ++f) fx.host.push_back(render_scene(scene, f, size));

  const int m_obj = std::max(1, frames - 2);
  const int ow = std::max(4, static_cast<int>(size * rng.uniform(0.25, 0.4)));
  const int oh = std::max(4, static_cast<int>(size * rng.uniform(0.25, 0.4)));
  fx.spec.scale = rng.uniform(0.8, 1.2);
  const int sw = std::max(1, static_cast<int>(std::lround(ow * fx.spec.scale)));
  const int sh = std::max(1, static_cast<int>(std::lround(oh * fx.spec.scale)));
  fx.spec.row = rng.range(2, size - sh - 2);
  fx.spec.col = rng.range(2, size - sw - 2);

  // Elliptical object with a mild gradient; recolour until it contrasts with
  // every covered host pixel.
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 500) throw std::runtime_error("splice fixture: no contrasting object colour");
    const auto base = random_color(rng, 0.0, 255.0);
    fx.spec.object_frames.clear();
    fx.spec.object_masks.clear();
    for (int f = 0; f < m_obj; ++f) {
      Image obj(ow, oh, 3), alpha(ow, oh, 1, 0);
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const double du = (x + 0.5) / ow - 0.5, dv = (y + 0.5) / oh - 0.5;
          if (du * du + dv * dv <= 0.25) alpha.at(y, x) = 255;
          for (int c = 0; c < 3; ++c) obj.at(y, x, c) = to_u8(base[c] + 10.0 * (du + dv));
        }
      }
      fx.spec.object_frames.push_back(std::move(obj));
      fx.spec.object_masks.push_back(std::move(alpha));
    }
    fx.spliced = synth_splice(fx.host, fx.spec);
    bool contrast = true;
    for (int f = 0; f < m_obj && contrast; ++f) {
      const Image& m = fx.spliced.masks[f];
      for (std::size_t i = 0; i < m.pixel_count() && contrast; ++i) {
        if (m.data[i] == 0) continue;
        int best = 0;
        for (int c = 0; c < 3; ++c) {
          best = std::max(best, std::abs(fx.spliced.frames[f].data[i * 3 + c] -
                                         fx.host[f].data[i * 3 + c]));
        }
        contrast = best / 255.0 > min_diff;
      }
    }
    if (contrast) break;
  }
  return fx;
}

}  // namespace hashtrace
