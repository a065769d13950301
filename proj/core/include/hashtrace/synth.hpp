#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hashtrace/dataset.hpp"
#include "hashtrace/rng.hpp"

namespace hashtrace {

/// Procedural scene: tinted gradient background, drifting stripe texture and
/// a few bouncing shapes. Coordinates are normalized to [0, 1].
struct SceneParams {
  struct Shape {
    bool circle = true;
    std::array<double, 3> color{};
    double radius = 0.1;
    double x = 0.5, y = 0.5;    // position at frame 0
    double vx = 0.0, vy = 0.0;  // per-frame velocity
  };
  std::array<double, 3> bg_a{}, bg_b{};
  double gradient_angle = 0.0;
  double stripe_freq = 2.0;
  double stripe_angle = 0.0;
  double stripe_amp = 20.0;
  double stripe_speed = 0.0;
  std::vector<Shape> shapes;
};

SceneParams random_scene(Rng& rng);
Image render_scene(const SceneParams& scene, int frame, int size);

enum class EditKind { kRecolor, kObjectSwap, kFill };

/// Localized edit turning an original into a fake.
struct EditParams {
  EditKind kind = EditKind::kRecolor;
  double x = 0.3, y = 0.3, w = 0.3, h = 0.3;  // region (recolor / fill)
  double vx = 0.0, vy = 0.0;                  // region drift per frame
  std::size_t shape = 0;                      // object swap target
  SceneParams::Shape replacement;
};

EditParams random_edit(Rng& rng, EditKind kind, const SceneParams& scene);
Image render_fake(const SceneParams& scene, const EditParams& edit, int frame, int size);
/// 255 where any channel differs.
Image diff_mask_exact(const Image& a, const Image& b);

struct SynthConfig {
  int num_groups = 8;
  int fakes_per_group = 3;
  int frames = 16;
  int size = 64;
  std::uint64_t seed = 0;
};

inline constexpr double kMinEditCoverage = 0.01;
inline constexpr double kMaxEditCoverage = 0.40;

/// Writes `<out>/gNNN/original`, `<out>/gNNN/fake_MM` frame directories (fakes
/// also carry ground-truth masks) and `<out>/manifest.tsv`. Deterministic in
/// the seed.
GroupSet gen_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& out);

/// Host video plus a spliced object, with exact ground-truth masks. The object
/// colour differs from the host by more than `min_diff` (0..1, max channel) at
/// every composited pixel.
struct SpliceFixture {
  Frames host;
  SpliceSpec spec;
  SpliceResult spliced;
};

SpliceFixture make_splice_fixture(std::uint64_t seed, int size, int frames,
                                  double min_diff = 0.2);

}  // namespace hashtrace
