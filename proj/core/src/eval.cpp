#include "hashtrace/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hashtrace/parallel.hpp"
#include "hashtrace/rng.hpp"

namespace hashtrace {

namespace fs = std::filesystem;

std::vector<QueryVideo> load_held_out_videos(const GroupSet& gs) {
  std::vector<QueryVideo> out(gs.groups.size());
  parallel_for(gs.groups.size(), [&](std::size_t g) {
    const Group& group = gs.groups[g];
    const VideoRef& ref = group.fakes.back();
    out[g] = {group.group_id, ref.label, read_frames(ref.path)};
  });
  return out;
}

std::vector<QueryVideo> load_original_videos(const GroupSet& gs) {
  std::vector<QueryVideo> out(gs.groups.size());
  parallel_for(gs.groups.size(), [&](std::size_t g) {
    const Group& group = gs.groups[g];
    out[g] = {group.group_id, group.original.label, read_frames(group.original.path)};
  });
  return out;
}

std::vector<LabeledClip> make_queries(std::span<const QueryVideo> videos, const Perturbation& perturbation,
                                      std::size_t T, std::size_t stride, std::size_t clips_per_video,
                                      std::uint64_t seed) {
  std::vector<std::vector<LabeledClip>> per_video(videos.size());
  parallel_for(videos.size(), [&](std::size_t v) {
    const QueryVideo& qv = videos[v];
    const VideoFeatures vf = describe_frames(perturb(qv.frames, perturbation));
    for (std::size_t c = 0; c < clips_per_video; ++c) {
      const std::uint64_t clip_seed = mix_seed(seed, 0x9e4e5 + qv.group_id, c);
      per_video[v].push_back({sample_clip(vf, T, stride, clip_seed), qv.group_id, qv.label});
    }
  });
  std::vector<LabeledClip> out;
  for (auto& pv : per_video) {
    for (auto& q : pv) out.push_back(std::move(q));
  }
  return out;
}

std::vector<GroupMeta> group_meta(const GroupSet& gs) {
  std::vector<GroupMeta> meta;
  for (const auto& g : gs.groups) meta.push_back({g.group_id, g.original.label, g.original.relative_path});
  return meta;
}

HashCode encode(const EncoderParams& params, const FeatureSequence& clip) {
  return binarize(forward(params, clip));
}

EvalRow evaluate(const TraceIndex& idx, const EncoderParams& params, std::span<const LabeledClip> queries,
                 const std::string& condition, std::vector<ConfusionRow>* confusion) {
  if (queries.empty()) throw std::invalid_argument("evaluate: no queries");
  std::vector<TraceResult> traced(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { traced[i] = idx.trace(encode(params, queries[i].clip)); });
  EvalRow row;
  row.condition = condition;
  row.k = idx.k();
  row.queries = queries.size();
  std::size_t hits = 0;
  double dist = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    hits += traced[i].group_id == queries[i].group_id;
    dist += static_cast<double>(traced[i].distance);
    if (confusion) {
      confusion->push_back({condition, queries[i].label, queries[i].group_id, traced[i].group_id, traced[i].distance});
    }
  }
  row.accuracy = static_cast<double>(hits) / static_cast<double>(queries.size());
  row.mean_distance = dist / static_cast<double>(queries.size());
  return row;
}

double top1_accuracy(const TraceIndex& idx, const EncoderParams& params, std::span<const LabeledClip> queries) {
  return evaluate(idx, params, queries, "").accuracy;
}

std::vector<Perturbation> default_perturbations() {
  std::vector<Perturbation> out;
  for (const char* name : {"none", "detail", "gaussian_blur", "box_blur", "median", "crop"}) {
    out.push_back(parse_perturbation(name));
  }
  return out;
}

EvalReport robustness_suite(const TraceIndex& idx, const EncoderParams& params,
                            std::span<const QueryVideo> videos, std::span<const Perturbation> perturbations,
                            const QueryOptions& opts) {
  EvalReport report;
  for (const auto& p : perturbations) {
    const auto queries = make_queries(videos, p, params.cfg.T, opts.stride, opts.clips_per_video, opts.seed);
    report.rows.push_back(evaluate(idx, params, queries, p.name(), &report.confusion));
  }
  return report;
}

std::vector<AblationResult> ablation_run(const TrainingData& data, const TrainConfig& base, LossMode mode,
                                         std::span<const Activation> activations,
                                         std::span<const QueryVideo> held_out, const QueryOptions& opts) {
  std::vector<AblationResult> out;
  const auto meta = group_meta(data.groups());
  for (Activation act : activations) {
    TrainConfig cfg = base;
    cfg.mode = mode;
    cfg.activation = act;
    FitResult fr = fit(data, cfg);
    AblationResult r;
    r.mode = mode;
    r.activation = act;
    r.history = std::move(fr.history);
    r.centers = fr.centers;
    if (!held_out.empty()) {
      const TraceIndex idx = build_index(fr.centers, meta);
      const auto queries = make_queries(held_out, Perturbation{}, cfg.T, opts.stride, opts.clips_per_video, opts.seed);
      r.accuracy = top1_accuracy(idx, fr.params, queries);
    }
    out.push_back(std::move(r));
  }
  return out;
}

TrainRecord tail_mean(const TrainHistory& history, std::size_t window) {
  TrainRecord r;
  if (history.empty()) return r;
  const std::size_t n = std::min(window == 0 ? history.size() : window, history.size());
  for (std::size_t i = history.size() - n; i < history.size(); ++i) {
    r.loss += history[i].loss;
    r.inter_mean += history[i].inter_mean;
    r.intra_mean += history[i].intra_mean;
    r.mean_bit += history[i].mean_bit;
  }
  const double d = static_cast<double>(n);
  r.loss /= d;
  r.inter_mean /= d;
  r.intra_mean /= d;
  r.mean_bit /= d;
  r.iter = history.back().iter;
  return r;
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

std::vector<fs::path> report_emit(const fs::path& out_dir, const EvalReport* robustness,
                                  std::span<const AblationResult> ablations) {
  ensure_dir(out_dir);
  std::vector<fs::path> written;
  if (robustness) {
    std::string csv = "perturbation,k,accuracy\n";
    for (const auto& r : robustness->rows) {
      csv += r.condition + "," + std::to_string(r.k) + "," + fmt("%.6f", r.accuracy) + "\n";
    }
    written.push_back(out_dir / "robustness.csv");
    write_text(written.back(), csv);
  }
  if (!ablations.empty()) {
    std::string results = "mode,activation,accuracy,inter_mean,intra_mean,mean_bit\n";
    for (const auto& a : ablations) {
      const std::string stem =
          "ablation_" + std::string(to_string(a.mode)) + "_" + std::string(to_string(a.activation));
      written.push_back(out_dir / (stem + ".csv"));
      write_text(written.back(), history_csv(a.history));
      const TrainRecord tail = tail_mean(a.history, std::max<std::size_t>(1, a.history.size() / 10));
      results += std::string(to_string(a.mode)) + "," + std::string(to_string(a.activation)) + "," +
                 fmt("%.6f", a.accuracy) + "," + fmt("%.6f", tail.inter_mean) + "," + fmt("%.6f", tail.intra_mean) +
                 "," + fmt("%.6f", tail.mean_bit) + "\n";
    }
    written.push_back(out_dir / "ablation_results.csv");
    write_text(written.back(), results);
  }
  return written;
}

std::vector<fs::path> report_summarize(const fs::path& in_dir, const fs::path& out_dir) {
  if (!fs::is_directory(in_dir)) throw std::runtime_error("not a directory: " + in_dir.string());
  ensure_dir(out_dir);
  std::vector<fs::path> written;

  const fs::path rob = in_dir / "robustness.csv";
  if (fs::exists(rob)) {
    const auto rows = read_csv(rob);
    double base = -1.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() == 3 && rows[i][0] == "original") base = std::stod(rows[i][2]);
    }
    std::string csv = "perturbation,k,accuracy,drop_pp\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 3) throw std::runtime_error(rob.string() + ": malformed row " + std::to_string(i + 1));
      const double acc = std::stod(rows[i][2]);
      csv += rows[i][0] + "," + rows[i][1] + "," + rows[i][2] + "," +
             (base >= 0.0 ? fmt("%.2f", 100.0 * (base - acc)) : std::string("nan")) + "\n";
    }
    written.push_back(out_dir / "robustness_summary.csv");
    write_text(written.back(), csv);
  }

  std::vector<fs::path> histories;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    const std::string name = e.path().filename().string();
    if (name.starts_with("ablation_") && name.ends_with(".csv") && name != "ablation_results.csv" &&
        name != "ablation_summary.csv") {
      histories.push_back(e.path());
    }
  }
  std::sort(histories.begin(), histories.end());
  if (!histories.empty()) {
    std::string csv = "run,iterations,final_loss,final_inter_mean,final_intra_mean,final_mean_bit\n";
    for (const auto& h : histories) {
      const auto rows = read_csv(h);
      if (rows.size() < 2 || rows.back().size() != 5) {
        throw std::runtime_error(h.string() + ": not a training history");
      }
      const auto& last = rows.back();
      std::string run = h.stem().string().substr(std::string("ablation_").size());
      csv += run + "," + std::to_string(rows.size() - 1) + "," + last[1] + "," + last[2] + "," + last[3] + "," +
             last[4] + "\n";
    }
    written.push_back(out_dir / "ablation_summary.csv");
    write_text(written.back(), csv);
  }
  if (written.empty()) throw std::runtime_error("report: no robustness.csv or ablation_*.csv in " + in_dir.string());
  return written;
}

}  // namespace hashtrace
