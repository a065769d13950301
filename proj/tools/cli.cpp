#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "hashtrace/dataset.hpp"
#include "hashtrace/eval.hpp"
#include "hashtrace/index.hpp"
#include "hashtrace/localizator.hpp"
#include "hashtrace/parallel.hpp"
#include "hashtrace/rng.hpp"
#include "hashtrace/synth.hpp"
#include "hashtrace/trainer.hpp"

namespace hashtrace::cli {

namespace fs = std::filesystem;

namespace {

// Bad flag values found after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

GroupSet load_dataset(const fs::path& dir) {
  return load_manifest(fs::is_directory(dir) ? dir / kManifestName : dir);
}

const std::vector<std::string> kActivations = {"tanh", "sigmoid", "relu"};
const std::vector<std::string> kModes = {"both", "intra", "inter"};

struct GenDataOpts {
  SynthConfig cfg;
  std::string out;
};

struct TrainOpts {
  std::string data, out;
  std::uint32_t bits = 64, clip = 8, embed = 64;
  std::size_t batch_groups = 8, iters = 500;
  double lr = 1e-5;
  std::string activation = "tanh", hidden = "same", mode = "both";
  std::uint64_t seed = 0;

  TrainConfig config() const {
    TrainConfig c;
    c.k = bits;
    c.T = clip;
    c.E = embed;
    c.batch_groups = batch_groups;
    c.iterations = iters;
    c.learning_rate = lr;
    c.activation = parse_activation(activation);
    if (hidden != "same") c.hidden_activation = parse_activation(hidden);
    c.mode = parse_loss_mode(mode);
    c.seed = seed;
    return c;
  }
};

void add_train_flags(CLI::App* sub, TrainOpts& o, bool with_mode) {
  sub->add_option("--data", o.data, "dataset directory or manifest")->required();
  sub->add_option("--out", o.out, "output directory")->required();
  sub->add_option("--bits", o.bits, "hash code length k")->capture_default_str()->check(CLI::Range(1u, 1u << 16));
  sub->add_option("--clip", o.clip, "frames per clip T")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--embed", o.embed, "embedding width")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--batch-groups", o.batch_groups, "groups per batch (>= 8)")->capture_default_str()->check(CLI::Range(std::size_t{8}, std::size_t{1} << 20));
  sub->add_option("--iters", o.iters, "training iterations")->capture_default_str();
  sub->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "seed")->capture_default_str();
  sub->add_option("--hidden-activation", o.hidden, "head nonlinearity: same, tanh, sigmoid or relu")
      ->capture_default_str()
      ->check(CLI::IsMember({"same", "tanh", "sigmoid", "relu"}));
  if (with_mode) {
    sub->add_option("--activation", o.activation, "tanh, sigmoid or relu")->capture_default_str()->check(CLI::IsMember(kActivations));
    sub->add_option("--mode", o.mode, "loss terms: both, intra or inter")->capture_default_str()->check(CLI::IsMember(kModes));
  }
}

int cmd_gen_data(const GenDataOpts& o, std::ostream& out, std::ostream& err) {
  const GroupSet gs = gen_synthetic_dataset(o.cfg, o.out);
  err << "generated " << gs.m() << " groups, " << gs.n_fakes() << " fakes in " << o.out << "\n";
  out << (fs::path(o.out) / kManifestName).string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = o.config();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const TrainingData data(load_dataset(o.data));
  const FitResult fr = fit(data, cfg);
  fs::create_directories(o.out);
  save_params(fr.params, (fs::path(o.out) / "model.vthp").string());
  save_index(build_index(fr.centers, group_meta(data.groups())), (fs::path(o.out) / "index.vthx").string());
  write_text(fs::path(o.out) / "history.csv", history_csv(fr.history));
  const TrainRecord last = fr.history.empty() ? TrainRecord{} : fr.history.back();
  err << "trained " << cfg.iterations << " iterations on " << data.groups().m() << " groups, k=" << cfg.k << "\n";
  out << "final\t" << fmt("%.6f", last.loss) << "\t" << fmt("%.4f", last.inter_mean) << "\t"
      << fmt("%.4f", last.intra_mean) << "\t" << fmt("%.4f", last.mean_bit) << "\n";
  return kExitOk;
}

struct TraceOpts {
  std::string index, model, video;
  std::size_t clips = 1, stride = 1;
  std::uint64_t seed = 0;
};

int cmd_trace(const TraceOpts& o, std::ostream& out, std::ostream&) {
  const TraceIndex idx = load_index(o.index);
  const EncoderParams params = load_params(o.model);
  if (params.cfg.k != idx.k()) {
    throw std::runtime_error("model emits " + std::to_string(params.cfg.k) + "-bit codes but the index holds " +
                             std::to_string(idx.k()) + "-bit centers");
  }
  const VideoFeatures vf = describe_frames(read_frames(o.video));
  for (std::size_t c = 0; c < o.clips; ++c) {
    const FeatureSequence clip = sample_clip(vf, params.cfg.T, o.stride, mix_seed(o.seed, c));
    const TraceResult r = idx.trace(encode(params, clip));
    out << r.group_id << "\t" << r.label << "\t" << r.distance << "\t"
        << (r.runner_up_distance ? std::to_string(*r.runner_up_distance) : std::string("-")) << "\n";
  }
  return kExitOk;
}

struct EvalOpts {
  std::string index, model, data, perturb = "none", out;
  std::size_t clips = kClipsPerQueryVideo, stride = 1;
  std::uint64_t seed = 0;
};

std::vector<Perturbation> parse_perturbations(const std::string& list) {
  std::vector<Perturbation> out;
  try {
    for (const auto& item : split_list(list)) out.push_back(parse_perturbation(item));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (out.empty()) throw UsageError("--perturb: empty list");
  return out;
}

int cmd_eval(const EvalOpts& o, std::ostream& out, std::ostream& err) {
  const auto perts = o.perturb == "all" ? default_perturbations() : parse_perturbations(o.perturb);
  const TraceIndex idx = load_index(o.index);
  const EncoderParams params = load_params(o.model);
  const GroupSet gs = load_dataset(o.data);
  const auto videos = load_held_out_videos(gs);
  QueryOptions qo;
  qo.clips_per_video = o.clips;
  qo.stride = o.stride;
  qo.seed = o.seed;
  const EvalReport report = robustness_suite(idx, params, videos, perts, qo);
  for (const auto& r : report.rows) {
    out << r.condition << "\t" << r.k << "\t" << fmt("%.6f", r.accuracy) << "\t" << fmt("%.4f", r.mean_distance)
        << "\t" << r.queries << "\n";
  }
  if (!o.out.empty()) {
    for (const auto& p : report_emit(o.out, &report, {})) err << "wrote " << p.string() << "\n";
  }
  return kExitOk;
}

struct AblateOpts {
  TrainOpts train;
  std::string activations = "tanh,sigmoid,relu";
};

int cmd_ablate(const AblateOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<Activation> acts;
  try {
    for (const auto& a : split_list(o.activations)) acts.push_back(parse_activation(a));
    o.train.config().validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (acts.empty()) throw UsageError("--activations: empty list");
  const TrainConfig base = o.train.config();
  const TrainingData data(load_dataset(o.train.data));
  const auto held_out = load_held_out_videos(data.groups());
  const auto results = ablation_run(data, base, base.mode, acts, held_out);
  for (const auto& p : report_emit(o.train.out, nullptr, results)) err << "wrote " << p.string() << "\n";
  for (const auto& r : results) {
    const TrainRecord t = tail_mean(r.history, std::max<std::size_t>(1, r.history.size() / 10));
    out << to_string(r.mode) << "\t" << to_string(r.activation) << "\t" << fmt("%.6f", r.accuracy) << "\t"
        << fmt("%.4f", t.inter_mean) << "\t" << fmt("%.4f", t.intra_mean) << "\t" << fmt("%.4f", t.mean_bit) << "\n";
  }
  return kExitOk;
}

struct LocalizeOpts {
  std::string fake, original, out, gt;
  double tau = 0.08;
  int radius = 1;
};

int cmd_localize(const LocalizeOpts& o, std::ostream& out, std::ostream& err) {
  const Frames fake = read_frames(o.fake);
  const Frames original = read_frames(o.original);
  if (fake.empty() || original.empty()) throw std::runtime_error("localize: no frames found");
  const AlignmentSpec spec = align(fake, original);
  const Frames masks = diff_mask(fake, original, spec, o.tau, o.radius);
  fs::create_directories(o.out);
  for (std::size_t i = 0; i < masks.size(); ++i) write_pnm(fs::path(o.out) / frame_name("pred_mask_", i, ".pgm"), masks[i]);
  err << "wrote " << masks.size() << " masks to " << o.out << "\n";
  out << "align\t" << fmt("%.2f", spec.scale) << "\t" << spec.dy << "\t" << spec.dx << "\t" << fmt("%.4f", spec.score)
      << "\n";
  // Ground truth: explicit directory, else masks stored next to the fake frames.
  const fs::path gt_dir = o.gt.empty() ? fs::path(o.fake) : fs::path(o.gt);
  Frames gt = read_frames(gt_dir, "mask_", ".pgm");
  if (!gt.empty()) {
    if (gt.size() > masks.size()) gt.resize(masks.size());
    const Frames pred(masks.begin(), masks.begin() + static_cast<std::ptrdiff_t>(gt.size()));
    out << "mIoU=" << fmt("%.4f", miou(pred, gt)) << "\n";
  } else if (!o.gt.empty()) {
    throw std::runtime_error("no mask_*.pgm files in " + o.gt);
  }
  return kExitOk;
}

int cmd_report(const std::string& in, const std::string& out_dir, std::ostream& out) {
  for (const auto& p : report_summarize(in, out_dir)) out << p.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hash-based source tracing and tamper localization for forged videos", "hashtrace"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (default: HASHTRACE_THREADS, else 1)");

  GenDataOpts gen;
  auto* s_gen = app.add_subcommand("gen-data", "write a synthetic forgery dataset");
  s_gen->add_option("--groups", gen.cfg.num_groups, "groups")->capture_default_str()->check(CLI::Range(2, 1000000));
  s_gen->add_option("--fakes", gen.cfg.fakes_per_group, "fakes per group")->capture_default_str()->check(CLI::Range(2, 1000));
  s_gen->add_option("--frames", gen.cfg.frames, "frames per video")->capture_default_str()->check(CLI::PositiveNumber);
  s_gen->add_option("--size", gen.cfg.size, "frame side in pixels")->capture_default_str()->check(CLI::Range(16, 4096));
  s_gen->add_option("--seed", gen.cfg.seed, "seed")->capture_default_str();
  s_gen->add_option("--out", gen.out, "output directory")->required();

  TrainOpts train;
  auto* s_train = app.add_subcommand("train", "fit the encoder and write model, index and history");
  add_train_flags(s_train, train, true);

  TraceOpts trace;
  auto* s_trace = app.add_subcommand("trace", "trace a video to its source group");
  s_trace->add_option("--index", trace.index, "index file")->required();
  s_trace->add_option("--model", trace.model, "model file")->required();
  s_trace->add_option("--video", trace.video, "frame directory")->required();
  s_trace->add_option("--clips", trace.clips, "clips to trace")->capture_default_str()->check(CLI::PositiveNumber);
  s_trace->add_option("--stride", trace.stride, "frame stride")->capture_default_str()->check(CLI::PositiveNumber);
  s_trace->add_option("--seed", trace.seed, "clip sampling seed")->capture_default_str();

  EvalOpts ev;
  auto* s_eval = app.add_subcommand("eval", "held-out Top-1 accuracy per perturbation");
  s_eval->add_option("--index", ev.index, "index file")->required();
  s_eval->add_option("--model", ev.model, "model file")->required();
  s_eval->add_option("--data", ev.data, "dataset directory or manifest")->required();
  s_eval->add_option("--perturb", ev.perturb, "comma list of perturbations, or 'all'")->capture_default_str();
  s_eval->add_option("--clips", ev.clips, "clips per video")->capture_default_str()->check(CLI::PositiveNumber);
  s_eval->add_option("--stride", ev.stride, "frame stride")->capture_default_str()->check(CLI::PositiveNumber);
  s_eval->add_option("--seed", ev.seed, "clip sampling seed")->capture_default_str();
  s_eval->add_option("--out", ev.out, "also write robustness.csv here");

  AblateOpts ab;
  auto* s_ab = app.add_subcommand("ablate", "train one loss mode across activations");
  add_train_flags(s_ab, ab.train, false);
  s_ab->add_option("--mode", ab.train.mode, "loss terms: both, intra or inter")->capture_default_str()->check(CLI::IsMember(kModes));
  s_ab->add_option("--activations", ab.activations, "comma list")->capture_default_str();

  LocalizeOpts loc;
  auto* s_loc = app.add_subcommand("localize", "tamper masks of a fake against its original");
  s_loc->add_option("--fake", loc.fake, "fake frame directory")->required();
  s_loc->add_option("--original", loc.original, "original frame directory")->required();
  s_loc->add_option("--out", loc.out, "mask output directory")->required();
  s_loc->add_option("--tau", loc.tau, "difference threshold in [0, 1]")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  s_loc->add_option("--radius", loc.radius, "morphology radius")->capture_default_str()->check(CLI::Range(0, 64));
  s_loc->add_option("--gt", loc.gt, "ground-truth mask directory (mask_*.pgm)");

  std::string rep_in, rep_out;
  auto* s_rep = app.add_subcommand("report", "summarize eval and ablation CSVs");
  s_rep->add_option("--in", rep_in, "directory with robustness.csv / ablation_*.csv")->required();
  s_rep->add_option("--out", rep_out, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    set_thread_count(threads);
    if (*s_gen) return cmd_gen_data(gen, out, err);
    if (*s_train) return cmd_train(train, out, err);
    if (*s_trace) return cmd_trace(trace, out, err);
    if (*s_eval) return cmd_eval(ev, out, err);
    if (*s_ab) return cmd_ablate(ab, out, err);
    if (*s_loc) return cmd_localize(loc, out, err);
    if (*s_rep) return cmd_report(rep_in, rep_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace hashtrace::cli
