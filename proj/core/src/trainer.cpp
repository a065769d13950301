#include "hashtrace/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "hashtrace/parallel.hpp"
#include "hashtrace/rng.hpp"

namespace hashtrace {

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kBoth:
      return "both";
    case LossMode::kIntraOnly:
      return "intra";
    case LossMode::kInterOnly:
      return "inter";
  }
  return "unknown";
}

LossMode parse_loss_mode(std::string_view name) {
  if (name == "both") return LossMode::kBoth;
  if (name == "intra" || name == "intra_only") return LossMode::kIntraOnly;
  if (name == "inter" || name == "inter_only") return LossMode::kInterOnly;
  throw std::invalid_argument("unknown loss mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_groups < 8) {
    throw std::invalid_argument("batch_groups must be >= 8, got " + std::to_string(batch_groups));
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  encoder_config().validate();
}

EncoderConfig TrainConfig::encoder_config() const {
  EncoderConfig ec;
  ec.D = static_cast<std::uint32_t>(kDescriptorDim);
  ec.E = E;
  ec.k = k;
  ec.T = T;
  ec.activation = activation;
  ec.hidden = hidden_activation;
  ec.init_seed = static_cast<std::uint32_t>(mix_seed(seed, 0xe4c0de));
  return ec;
}

TrainingData::TrainingData(GroupSet gs) : gs_(std::move(gs)) {
  originals_.resize(gs_.groups.size());
  fakes_.resize(gs_.groups.size());
  for (std::size_t g = 0; g < gs_.groups.size(); ++g) {
    const Group& group = gs_.groups[g];
    if (group.group_id != g) throw std::invalid_argument("group ids must be dense from 0");
    if (group.fakes.size() < 2) {
      throw std::invalid_argument("group " + std::to_string(g) + ": needs at least 2 fakes");
    }
    fakes_[g].resize(group.fakes.size());
  }
  parallel_for(gs_.groups.size(), [&](std::size_t g) {
    const Group& group = gs_.groups[g];
    originals_[g] = describe_video(group.original);
    for (std::size_t j = 0; j < group.fakes.size(); ++j) fakes_[g][j] = describe_video(group.fakes[j]);
  });
}

std::size_t TrainingData::training_fakes(std::size_t g) const {
  const std::size_t n = gs_.groups[g].fakes.size();
  return n >= 3 ? n - 1 : n;
}

std::vector<std::uint32_t> batch_groups(std::size_t num_groups, std::size_t batch_size,
                                        std::uint64_t seed, std::size_t iter) {
  if (batch_size > num_groups) {
    throw std::invalid_argument("batch needs " + std::to_string(batch_size) +
                                " distinct groups but only " + std::to_string(num_groups) +
                                " exist");
  }
  const std::size_t per_epoch = (num_groups + batch_size - 1) / batch_size;
  const std::size_t epoch = iter / per_epoch;
  const std::size_t slot = iter % per_epoch;
  std::vector<std::uint32_t> perm(num_groups);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(mix_seed(seed, 0xba7c4, epoch));
  rng.shuffle(perm);
  std::vector<std::uint32_t> out;
  for (std::size_t i = slot * batch_size; i < num_groups && out.size() < batch_size; ++i) {
    out.push_back(perm[i]);
  }
  for (std::size_t i = 0; out.size() < batch_size; ++i) out.push_back(perm[i]);
  return out;
}

std::vector<TripletUnit> build_batch(const TrainingData& data, const TrainConfig& cfg,
                                     std::size_t iter) {
  const auto ids = batch_groups(data.groups().m(), cfg.batch_groups, cfg.seed, iter);
  std::vector<TripletUnit> units(ids.size());
  for (std::size_t b = 0; b < ids.size(); ++b) {
    const std::uint32_t g = ids[b];
    TripletUnit& u = units[b];
    u.group_id = g;
    Rng rng(mix_seed(cfg.seed, iter, 0x100000000ULL + g));
    const std::size_t n = data.training_fakes(g);
    u.fake_1 = static_cast<std::size_t>(rng.below(n));
    u.fake_2 = static_cast<std::size_t>(rng.below(n - 1));
    if (u.fake_2 >= u.fake_1) ++u.fake_2;
    const std::uint64_t clip_seed = mix_seed(cfg.seed, iter, 0x200000000ULL + g);
    u.original_clip = sample_clip(data.original(g), cfg.T, cfg.stride, mix_seed(clip_seed, 0));
    u.fake_clip_1 = sample_clip(data.fake(g, u.fake_1), cfg.T, cfg.stride, mix_seed(clip_seed, 1));
    u.fake_clip_2 = sample_clip(data.fake(g, u.fake_2), cfg.T, cfg.stride, mix_seed(clip_seed, 2));
  }
  return units;
}

CenterSet revote_centers(const CodesByGroup& codes, const CenterSet& previous) {
  CenterSet next = previous;
  for (const auto& [id, gc] : codes) {
    if (!gc.anchor) throw std::invalid_argument("revote_centers: group " + std::to_string(id) + " has no anchor code");
    next.set(id, vote_center(gc.codes, *gc.anchor));
  }
  return next;
}

TrainRecord train_metrics(const CenterSet& centers, const CodesByGroup& codes) {
  TrainRecord r;
  if (centers.size() >= 2) r.inter_mean = mean_pairwise_hamming(centers.codes());
  std::size_t n = 0, ones = 0, bits = 0;
  double intra = 0.0;
  for (const auto& [id, gc] : codes) {
    const HashCode& center = centers.at(id);
    for (const auto& c : gc.codes) {
      intra += static_cast<double>(hamming(c, center));
      ones += c.popcount();
      bits += c.size();
      ++n;
    }
  }
  if (n > 0) {
    r.intra_mean = intra / static_cast<double>(n);
    r.mean_bit = static_cast<double>(ones) / static_cast<double>(bits);
  }
  return r;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

InputStats input_stats(const TrainingData& data) {
  const std::size_t D = kDescriptorDim;
  std::vector<double> sum(D, 0.0), sq(D, 0.0);
  std::size_t n = 0;
  auto add = [&](const VideoFeatures& vf) {
    for (const auto& f : vf.frames) {
      for (std::size_t d = 0; d < D; ++d) {
        sum[d] += f[d];
        sq[d] += f[d] * f[d];
      }
      ++n;
    }
  };
  for (std::size_t g = 0; g < data.groups().m(); ++g) {
    add(data.original(g));
    for (std::size_t j = 0; j < data.training_fakes(g); ++j) add(data.fake(g, j));
  }
  InputStats st{std::vector<double>(D), std::vector<double>(D)};
  for (std::size_t d = 0; d < D; ++d) {
    st.mean[d] = sum[d] / static_cast<double>(n);
    st.stddev[d] = std::sqrt(std::max(0.0, sq[d] / static_cast<double>(n) - st.mean[d] * st.mean[d]));
  }
  return st;
}

void fold_input_normalization(EncoderParams& params, std::span<const double> mean, std::span<const double> scale) {
  const ParamLayout L(params.cfg);
  const std::size_t D = params.cfg.D, E = params.cfg.E;
  if (mean.size() != D || scale.size() != D) throw std::invalid_argument("fold_input_normalization: size mismatch");
  double* W = params.values.data() + L.embed_w;
  double* b = params.values.data() + L.embed_b;
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t e = 0; e < E; ++e) {
      W[d * E + e] /= scale[d];
      b[e] -= mean[d] * W[d * E + e];
    }
  }
}

Whitening input_whitening(const TrainingData& data, double eig_floor) {
  const std::size_t D = kDescriptorDim;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(D);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(D, D);
  std::size_t n = 0;
  auto add = [&](const VideoFeatures& vf) {
    for (const auto& f : vf.frames) {
      const Eigen::Map<const Eigen::VectorXd> x(f.data(), D);
      sum += x;
      sq.selfadjointView<Eigen::Lower>().rankUpdate(x);
      ++n;
    }
  };
  for (std::size_t g = 0; g < data.groups().m(); ++g) {
    add(data.original(g));
    for (std::size_t j = 0; j < data.training_fakes(g); ++j) add(data.fake(g, j));
  }
  const Eigen::VectorXd mean = sum / static_cast<double>(n);
  Eigen::MatrixXd cov = sq.selfadjointView<Eigen::Lower>();
  cov = cov / static_cast<double>(n) - mean * mean.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd lam = es.eigenvalues();
  const double floor = std::max(lam.maxCoeff() * eig_floor, 1e-12);
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = 1.0 / std::sqrt(std::max(lam[i], floor));
  const Eigen::MatrixXd P = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  Whitening w;
  w.mean.assign(mean.data(), mean.data() + D);
  w.transform.resize(D * D);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) w.transform[i * D + j] = P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return w;
}

void fold_input_transform(EncoderParams& params, const Whitening& w) {
  const ParamLayout L(params.cfg);
  const std::size_t D = params.cfg.D, E = params.cfg.E;
  double* W = params.values.data() + L.embed_w;
  double* b = params.values.data() + L.embed_b;
  // z = (P (x - mean))^T W + b  =>  W' = P^T W, b' = b - mean^T W'
  std::vector<double> Wn(D * E, 0.0);
  for (std::size_t i = 0; i < D; ++i)
    for (std::size_t j = 0; j < D; ++j) {
      const double pji = w.transform[j * D + i];
      for (std::size_t e = 0; e < E; ++e) Wn[i * E + e] += pji * W[j * E + e];
    }
  for (std::size_t e = 0; e < E; ++e)
    for (std::size_t i = 0; i < D; ++i) b[e] -= w.mean[i] * Wn[i * E + e];
  std::copy(Wn.begin(), Wn.end(), W);
}

FeatureSequence anchor_clip(const TrainingData& data, std::size_t g, const TrainConfig& cfg) {
  return sample_clip(data.original(g), cfg.T, cfg.stride, mix_seed(cfg.seed, 0xa2c402, g));
}

FitResult fit(const TrainingData& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t m = data.groups().m();
  if (m < cfg.batch_groups) {
    throw std::invalid_argument("fit: need at least " + std::to_string(cfg.batch_groups) +
                                " groups, dataset has " + std::to_string(m));
  }
  FitResult res;
  res.params = init_params(cfg.encoder_config());
  res.centers = CenterSet(cfg.k);
  if (cfg.input_norm == InputNorm::kWhiten) {
    fold_input_transform(res.params, input_whitening(data, cfg.whiten_floor));
  } else if (cfg.input_norm == InputNorm::kStandardize) {
    const InputStats st = input_stats(data);
    std::vector<double> scale(st.stddev.size());
    for (std::size_t d = 0; d < scale.size(); ++d) scale[d] = std::max(st.stddev[d], cfg.input_scale_floor);
    fold_input_normalization(res.params, st.mean, scale);
  }

  // Every group starts at its original's binarized code.
  {
    std::vector<HashCode> init(m);
    parallel_for(m, [&](std::size_t g) {
      init[g] = binarize(forward(res.params, anchor_clip(data, g, cfg)));
    });
    for (std::size_t g = 0; g < m; ++g) res.centers.set(static_cast<std::uint32_t>(g), init[g]);
  }

  LossTerms terms;
  terms.intra = cfg.mode != LossMode::kInterOnly;
  terms.inter = cfg.mode != LossMode::kIntraOnly;
  Adam adam(res.params.values.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  const Activation act = cfg.activation;

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const auto units = build_batch(data, cfg, iter);
    const std::size_t nclips = units.size() * 3;
    auto clip_of = [&](std::size_t i) -> const FeatureSequence& {
      const TripletUnit& u = units[i / 3];
      switch (i % 3) {
        case 0:
          return u.original_clip;
        case 1:
          return u.fake_clip_1;
        default:
          return u.fake_clip_2;
      }
    };

    std::vector<ForwardCache> caches(nclips);
    parallel_for(nclips, [&](std::size_t i) { forward(res.params, clip_of(i), &caches[i]); });

    std::vector<LabeledCode> batch(nclips);
    for (std::size_t i = 0; i < nclips; ++i) {
      batch[i].group_id = units[i / 3].group_id;
      batch[i].code = to_unit(RelaxedCode{caches[i].out, act});
    }
    const LossResult lr = hash_triplet_loss(batch, res.centers, terms);
    if (!std::isfinite(lr.loss)) {
      throw std::runtime_error("fit: non-finite loss at iteration " + std::to_string(iter) +
                               " (intra_sum=" + std::to_string(lr.intra_sum) +
                               ", inter_sum=" + std::to_string(lr.inter_sum) + ")");
    }

    // Per-clip gradients land in their own slot and are summed in clip order.
    std::vector<EncoderGrads> clip_grads(nclips);
    parallel_for(nclips, [&](std::size_t i) {
      std::vector<double> upstream(cfg.k);
      for (std::size_t j = 0; j < cfg.k; ++j) {
        upstream[j] = lr.grads[i][j] * to_unit_grad(caches[i].out[j], act);
      }
      clip_grads[i].assign(res.params.values.size(), 0.0);
      backward(res.params, caches[i], upstream, clip_grads[i]);
    });
    EncoderGrads grads(res.params.values.size(), 0.0);
    for (const auto& cg : clip_grads) {
      for (std::size_t j = 0; j < grads.size(); ++j) grads[j] += cg[j];
    }
    double norm2 = 0.0;
    for (double g : grads) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) {
      throw std::runtime_error("fit: non-finite gradient at iteration " + std::to_string(iter));
    }
    if (norm > cfg.clip_norm) {
      const double s = cfg.clip_norm / norm;
      for (auto& g : grads) g *= s;
    }
    adam.step(res.params.values, grads);

    CodesByGroup codes;
    for (std::size_t i = 0; i < nclips; ++i) {
      GroupCodes& gc = codes[units[i / 3].group_id];
      HashCode code = binarize(RelaxedCode{caches[i].out, act});
      if (i % 3 == 0) gc.anchor = code;
      gc.codes.push_back(std::move(code));
    }
    res.centers = revote_centers(codes, res.centers);

    TrainRecord rec = train_metrics(res.centers, codes);
    rec.iter = iter;
    rec.loss = lr.loss;
    res.history.push_back(rec);
  }
  return res;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "iter,loss,inter_mean,intra_mean,mean_bit\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.loss, r.inter_mean,
                  r.intra_mean, r.mean_bit);
    out += buf;
  }
  return out;
}

}  // namespace hashtrace
