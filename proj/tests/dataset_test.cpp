#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "hashtrace/dataset.hpp"
#include "hashtrace/synth.hpp"
#include "support.hpp"

namespace hashtrace {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

Image solid(int w, int h, std::uint8_t v) { return Image(w, h, 3, v); }

TEST(Descriptor, BlackFrame) {
  const auto d = extract_descriptor(solid(16, 16, 0));
  ASSERT_EQ(d.size(), kDescriptorDim);
  for (int i = 0; i < kGrid * kGrid; ++i) EXPECT_EQ(d[i], 0.0);
  for (int c = 0; c < 3; ++c) {
    for (int b = 0; b < kHistBins; ++b) {
      EXPECT_EQ(d[kGrid * kGrid + c * kHistBins + b], b == 0 ? 1.0 : 0.0);
    }
  }
}

TEST(Descriptor, WhiteFrame) {
  const auto d = extract_descriptor(solid(16, 16, 255));
  for (int i = 0; i < kGrid * kGrid; ++i) EXPECT_EQ(d[i], 1.0);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(d[kGrid * kGrid + c * kHistBins + kHistBins - 1], 1.0);
}

TEST(Descriptor, HalfBlackHalfWhite) {
  Image img = solid(16, 16, 0);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 255;
  const auto d = extract_descriptor(img);
  for (int r = 0; r < kGrid; ++r) {
    for (int col = 0; col < kGrid; ++col) EXPECT_EQ(d[r * kGrid + col], col < 4 ? 0.0 : 1.0);
  }
  for (int c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(d[kGrid * kGrid + c * kHistBins], 0.5);
    EXPECT_DOUBLE_EQ(d[kGrid * kGrid + c * kHistBins + kHistBins - 1], 0.5);
  }
}

TEST(Descriptor, RangeAndHistogramMass) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const int w = 8 + static_cast<int>(rng.below(40)), h = 8 + static_cast<int>(rng.below(40));
    Image img(w, h, 3);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    const auto d = extract_descriptor(img);
    double mass = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_GE(d[i], 0.0);
      EXPECT_LE(d[i], 1.0);
      if (i >= kGrid * kGrid) mass += d[i];
    }
    EXPECT_NEAR(mass, 3.0, 1e-9);
  }
}

TEST(Descriptor, RejectsTinyOrGrayFrames) {
  EXPECT_THROW(extract_descriptor(solid(4, 4, 0)), std::invalid_argument);
  EXPECT_THROW(extract_descriptor(Image(16, 16, 1)), std::invalid_argument);
}

TEST(ClipSampling, Windows) {
  EXPECT_EQ(clip_start(10, 4, 3, 0), 0u);
  EXPECT_EQ(clip_start(10, 4, 3, 12345), 0u);
  EXPECT_EQ(clip_start(4, 4, 1, 99), 0u);
  std::set<std::size_t> seen;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const std::size_t start = clip_start(10, 4, 1, s);
    EXPECT_LE(start, 6u);
    EXPECT_EQ(start, clip_start(10, 4, 1, s));
    seen.insert(start);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_THROW(clip_start(3, 4, 1, 0), std::invalid_argument);
  EXPECT_THROW(clip_start(9, 4, 3, 0), std::invalid_argument);
}

TEST(ClipSampling, StrideSelectsFrames) {
  VideoFeatures v;
  for (int f = 0; f < 10; ++f) v.frames.push_back(std::vector<double>(kDescriptorDim, f));
  const FeatureSequence clip = sample_clip(v, 4, 3, 7);
  ASSERT_EQ(clip.T, 4u);
  ASSERT_EQ(clip.D, kDescriptorDim);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(clip.row(t)[0], 3.0 * t);
}

std::vector<double> reference_taps(int kernel, double sigma) {
  std::vector<double> t(kernel);
  const int r = kernel / 2;
  for (int i = -r; i <= r; ++i) t[i + r] = std::exp(-(i * i) / (2 * sigma * sigma));
  const double s = std::accumulate(t.begin(), t.end(), 0.0);
  for (auto& v : t) v /= s;
  return t;
}

TEST(Perturb, GaussianImpulseMatchesKernel) {
  const auto taps = reference_taps(5, 1.0);
  const auto got = gaussian_taps(5, 1.0);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(got[i], taps[i], 1e-15);
  Image img = solid(15, 15, 0);
  for (int c = 0; c < 3; ++c) img.at(7, 7, c) = 255;
  const Image out = perturb_frame(img, parse_perturbation("gaussian_blur:5:1"));
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      const double expect = 255.0 * taps[dy + 2] * taps[dx + 2];
      EXPECT_NEAR(out.at(7 + dy, 7 + dx, 1), expect, 0.5 + 1e-9);
    }
  }
  EXPECT_EQ(out.at(0, 0, 0), 0);
}

TEST(Perturb, MedianKeepsConstantFrame) {
  const Image img = solid(12, 10, 77);
  EXPECT_EQ(perturb_frame(img, parse_perturbation("median:3")), img);
  EXPECT_EQ(perturb_frame(img, parse_perturbation("box_blur:5")), img);
  EXPECT_EQ(perturb_frame(img, parse_perturbation("detail")), img);
}

TEST(Perturb, MedianRemovesSpeck) {
  Image img = solid(9, 9, 10);
  img.at(4, 4, 0) = 250;
  EXPECT_EQ(perturb_frame(img, parse_perturbation("median:3")).at(4, 4, 0), 10);
}

TEST(Perturb, CropTakesCentralRegion) {
  // A horizontal ramp is reproduced exactly by bilinear sampling, so the
  // output columns reveal which source columns were used.
  Image img(100, 100, 3);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>(x + 50);
  const Image out = perturb_frame(img, parse_perturbation("crop:0.1"));
  ASSERT_EQ(out.width, 100);
  ASSERT_EQ(out.height, 100);
  for (int x = 0; x < 100; ++x) {
    const double src = 10.0 + (x + 0.5) * 0.8 - 0.5;  // central 80 columns
    EXPECT_NEAR(out.at(50, x, 0), src + 50.0, 0.5 + 1e-9) << x;
  }
}

TEST(Perturb, PreservesShapeAndCount) {
  Rng rng(2);
  Frames frames;
  for (int i = 0; i < 3; ++i) {
    Image img(33, 21, 3);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    frames.push_back(img);
  }
  for (const char* spec : {"detail", "gaussian_blur", "box_blur", "median", "crop", "crop:0.5", "none"}) {
    const Frames out = perturb(frames, parse_perturbation(spec));
    ASSERT_EQ(out.size(), frames.size()) << spec;
    for (const auto& f : out) EXPECT_TRUE(f.same_shape(frames[0])) << spec;
  }
}

TEST(Perturb, ParseAndValidate) {
  EXPECT_EQ(parse_perturbation("none").kind, PerturbKind::kNone);
  const Perturbation g = parse_perturbation("gaussian_blur:7:2.5");
  EXPECT_EQ(g.kind, PerturbKind::kGaussianBlur);
  EXPECT_EQ(g.kernel, 7);
  EXPECT_DOUBLE_EQ(g.sigma, 2.5);
  EXPECT_DOUBLE_EQ(parse_perturbation("crop:0.2").fraction, 0.2);
  EXPECT_EQ(parse_perturbation("blur:3").kind, PerturbKind::kBoxBlur);
  for (const char* bad : {"median:4", "median:1", "box_blur:2", "crop:0", "crop:0.6", "gaussian_blur:5:0",
                          "detail:0", "detail:2", "sharpen", "median:3:3", "crop:x", ""}) {
    EXPECT_THROW(parse_perturbation(bad), std::invalid_argument) << bad;
  }
  EXPECT_EQ(parse_perturbation("median:7").name(), "median");
  EXPECT_EQ(parse_perturbation("none").name(), "original");
}

Frames object_of(int size, int frames, std::uint8_t value) {
  return Frames(static_cast<std::size_t>(frames), Image(size, size, 3, value));
}

TEST(Splice, SinglePixel) {
  const Frames host = object_of(6, 3, 10);
  SpliceSpec spec;
  spec.object_frames = object_of(1, 2, 200);
  spec.object_masks = Frames(2, Image(1, 1, 1, 255));
  const SpliceResult r = synth_splice(host, spec);
  ASSERT_EQ(r.frames.size(), 3u);
  for (int f = 0; f < 2; ++f) {
    EXPECT_EQ(r.frames[f].at(0, 0, 0), 200);
    EXPECT_EQ(r.frames[f].at(0, 1, 0), 10);
    std::size_t set = 0;
    for (auto v : r.masks[f].data) set += v == 255;
    EXPECT_EQ(set, 1u);
  }
  EXPECT_EQ(r.frames[2], host[2]);
}

TEST(Splice, TransparentObjectIsIdentity) {
  const Frames host = object_of(6, 3, 10);
  SpliceSpec spec;
  spec.object_frames = object_of(3, 2, 200);
  spec.object_masks = Frames(2, Image(3, 3, 1, 0));
  spec.row = 1;
  spec.col = 1;
  const SpliceResult r = synth_splice(host, spec);
  EXPECT_EQ(r.frames, host);
  for (const auto& m : r.masks)
    for (auto v : m.data) EXPECT_EQ(v, 0);
}

TEST(Splice, HalfScaleFootprint) {
  const Frames host = object_of(8, 2, 0);
  SpliceSpec spec;
  spec.scale = 0.5;
  spec.row = 2;
  spec.col = 3;
  spec.object_frames = object_of(4, 1, 255);
  spec.object_masks = Frames(1, Image(4, 4, 1, 255));
  const SpliceResult r = synth_splice(host, spec);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const bool inside = y >= 2 && y <= 3 && x >= 3 && x <= 4;
      EXPECT_EQ(r.frames[0].at(y, x, 0), inside ? 255 : 0) << y << "," << x;
      EXPECT_EQ(r.masks[0].at(y, x), inside ? 255 : 0);
    }
  }
}

TEST(Splice, MaskIsExactlyChangedPixels) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SpliceFixture fx = make_splice_fixture(seed, 48, 8);
    for (std::size_t f = 0; f < fx.host.size(); ++f) {
      const Image diff = diff_mask_exact(fx.spliced.frames[f], fx.host[f]);
      EXPECT_EQ(diff.data, fx.spliced.masks[f].data);
    }
  }
}

TEST(Splice, Errors) {
  const Frames host = object_of(8, 3, 0);
  SpliceSpec spec;
  spec.object_frames = object_of(4, 3, 255);
  spec.object_masks = Frames(3, Image(4, 4, 1, 255));
  EXPECT_THROW(synth_splice(host, spec), std::invalid_argument);  // m_obj == host length
  spec.object_frames.pop_back();
  spec.object_masks.pop_back();
  spec.row = 6;
  EXPECT_THROW(synth_splice(host, spec), std::invalid_argument);  // out of bounds
  spec.row = 0;
  spec.scale = 0.0;
  EXPECT_THROW(synth_splice(host, spec), std::invalid_argument);
}

void write_video(const fs::path& dir, int frames, std::uint8_t value) {
  fs::create_directories(dir);
  for (int f = 0; f < frames; ++f) write_pnm(dir / frame_name("frame_", f, ".ppm"), solid(8, 8, value));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(Manifest, LoadsValidGroups) {
  TempDir dir;
  for (int g = 0; g < 2; ++g) {
    write_video(dir.path() / ("g" + std::to_string(g)) / "o", 4, 10);
    write_video(dir.path() / ("g" + std::to_string(g)) / "f0", 4, 20);
    write_video(dir.path() / ("g" + std::to_string(g)) / "f1", 4, 30);
  }
  write_text(dir.path() / kManifestName,
             "# header\n"
             "0\toriginal\tg0/o\tzero\n0\tfake\tg0/f0\tzero_a\n0\tfake\tg0/f1\tzero_b\n"
             "\n"
             "1\tfake\tg1/f0\tone_a\n1\toriginal\tg1/o\tone\n1\tfake\tg1/f1\tone_b\n");
  const GroupSet gs = load_manifest(dir.path() / kManifestName);
  EXPECT_EQ(gs.m(), 2u);
  EXPECT_EQ(gs.n_fakes(), 4u);
  EXPECT_EQ(gs.z(), 6u);
  EXPECT_EQ(gs.groups[1].original.label, "one");
  EXPECT_EQ(gs.groups[1].original.frame_count, 4u);
  EXPECT_EQ(gs.groups[0].fakes[1].relative_path, "g0/f1");

  write_manifest(dir.path() / "copy.tsv", gs);
  const GroupSet again = load_manifest(dir.path() / "copy.tsv");
  ASSERT_EQ(again.m(), 2u);
  EXPECT_EQ(again.groups[1].fakes[0].label, gs.groups[1].fakes[0].label);
}

std::string load_error(const fs::path& manifest) {
  try {
    load_manifest(manifest);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

TEST(Manifest, ReportsBadGroups) {
  TempDir dir;
  write_video(dir.path() / "v", 4, 10);
  std::string rows;
  for (int g = 0; g < 3; ++g) {
    rows += std::to_string(g) + "\toriginal\tv\to\n" + std::to_string(g) + "\tfake\tv\ta\n" +
            std::to_string(g) + "\tfake\tv\tb\n";
  }
  write_text(dir.path() / "m1.tsv", rows + "3\tfake\tv\ta\n3\tfake\tv\tb\n");
  EXPECT_NE(load_error(dir.path() / "m1.tsv").find("group 3: no original"), std::string::npos);

  write_text(dir.path() / "m2.tsv", rows + "2\toriginal\tv\tagain\n");
  EXPECT_NE(load_error(dir.path() / "m2.tsv").find("group 2: duplicate group_id"), std::string::npos);

  write_text(dir.path() / "m3.tsv", rows + "3\toriginal\tv\to\n3\tfake\tnowhere\ta\n3\tfake\tv\tb\n");
  EXPECT_NE(load_error(dir.path() / "m3.tsv").find("group 3: missing frame directory"), std::string::npos);

  write_text(dir.path() / "m4.tsv", rows + "3\toriginal\tv\to\n3\tfake\tv\ta\n");
  EXPECT_NE(load_error(dir.path() / "m4.tsv").find("group 3"), std::string::npos);

  write_text(dir.path() / "m5.tsv", rows + "3\tcopy\tv\to\n");
  EXPECT_NE(load_error(dir.path() / "m5.tsv").find("role"), std::string::npos);

  write_text(dir.path() / "m6.tsv", rows + "5\toriginal\tv\to\n5\tfake\tv\ta\n5\tfake\tv\tb\n");
  EXPECT_NE(load_error(dir.path() / "m6.tsv").find("dense"), std::string::npos);

  EXPECT_FALSE(load_error(dir.path() / "absent.tsv").empty());
}

TEST(SyntheticData, DeterministicTrees) {
  TempDir a, b;
  SynthConfig cfg;
  cfg.num_groups = 2;
  cfg.fakes_per_group = 2;
  cfg.frames = 6;
  cfg.size = 32;
  cfg.seed = 7;
  gen_synthetic_dataset(cfg, a.path());
  gen_synthetic_dataset(cfg, b.path());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a.path()));
  }
  EXPECT_GT(files.size(), 30u);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const auto& rel : files) {
    ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
    EXPECT_EQ(slurp(a.path() / rel), slurp(b.path() / rel)) << rel;
  }
}

TEST(SyntheticData, EditCoverageAndDistinctOriginals) {
  TempDir dir;
  SynthConfig cfg;
  cfg.num_groups = 6;
  cfg.fakes_per_group = 3;
  cfg.frames = 8;
  cfg.size = 48;
  cfg.seed = 3;
  const GroupSet gs = gen_synthetic_dataset(cfg, dir.path());
  ASSERT_EQ(gs.m(), 6u);
  std::vector<Frames> originals;
  for (const auto& g : gs.groups) {
    originals.push_back(read_frames(g.original.path));
    ASSERT_EQ(g.fakes.size(), 3u);
    for (const auto& f : g.fakes) {
      const Frames fake = read_frames(f.path);
      const Frames masks = read_frames(f.path, "mask_", ".pgm");
      ASSERT_EQ(fake.size(), originals.back().size());
      ASSERT_EQ(masks.size(), fake.size());
      for (std::size_t i = 0; i < fake.size(); ++i) {
        const Image diff = diff_mask_exact(fake[i], originals.back()[i]);
        EXPECT_EQ(diff.data, masks[i].data);
        std::size_t changed = 0;
        for (auto v : diff.data) changed += v != 0;
        const double cov = static_cast<double>(changed) / static_cast<double>(diff.pixel_count());
        EXPECT_GE(cov, 0.01);
        EXPECT_LE(cov, 0.40);
      }
    }
  }
  for (std::size_t a = 0; a < originals.size(); ++a) {
    for (std::size_t b = a + 1; b < originals.size(); ++b) {
      for (std::size_t f = 0; f < originals[a].size(); ++f) {
        const auto da = extract_descriptor(originals[a][f]), db = extract_descriptor(originals[b][f]);
        double d2 = 0.0;
        for (std::size_t i = 0; i < da.size(); ++i) d2 += (da[i] - db[i]) * (da[i] - db[i]);
        EXPECT_GT(d2, 0.0);
      }
    }
  }
  EXPECT_EQ(load_manifest(dir.path() / kManifestName).m(), 6u);
}

TEST(SyntheticData, UnwritableOutput) {
  TempDir dir;
  write_text(dir.path() / "file", "x");
  SynthConfig cfg;
  cfg.num_groups = 2;
  cfg.fakes_per_group = 2;
  try {
    gen_synthetic_dataset(cfg, dir.path() / "file" / "sub");
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("not writable"), std::string::npos);
  }
}

TEST(Pnm, RoundTrip) {
  TempDir dir;
  Rng rng(4);
  Image rgb(5, 3, 3), gray(4, 6, 1);
  for (auto& v : rgb.data) v = static_cast<std::uint8_t>(rng.below(256));
  for (auto& v : gray.data) v = static_cast<std::uint8_t>(rng.below(256));
  write_pnm(dir.path() / "a.ppm", rgb);
  write_pnm(dir.path() / "b.pgm", gray);
  EXPECT_EQ(read_pnm(dir.path() / "a.ppm"), rgb);
  EXPECT_EQ(read_pnm(dir.path() / "b.pgm"), gray);
  write_text(dir.path() / "c.ppm", "P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(read_pnm(dir.path() / "c.ppm"), std::runtime_error);
}

}  // namespace
}  // namespace hashtrace
