#include "hashtrace/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hashtrace/binary_io.hpp"
#include "hashtrace/rng.hpp"

namespace hashtrace {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

void EncoderConfig::validate() const {
  if (D == 0 || E == 0 || k == 0 || T == 0) {
    throw std::invalid_argument("encoder config: D, E, k and T must be positive");
  }
  if (k % 8 != 0) throw std::invalid_argument("encoder config: k must be a multiple of 8");
  if (static_cast<unsigned>(activation) > 2) throw std::invalid_argument("encoder config: bad activation");
  if (hidden && static_cast<unsigned>(*hidden) > 2) throw std::invalid_argument("encoder config: bad hidden activation");
}

ParamLayout::ParamLayout(const EncoderConfig& cfg) {
  const std::size_t D = cfg.D, E = cfg.E, k = cfg.k;
  std::size_t off = 0;
  auto take = [&off](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  embed_w = take(D * E);
  embed_b = take(E);
  wq = take(E * E);
  wk = take(E * E);
  wv = take(E * E);
  head1_w = take(E * E);
  head1_b = take(E);
  head2_w = take(E * k);
  head2_b = take(k);
  total = off;
}

EncoderParams zero_params(const EncoderConfig& cfg) {
  cfg.validate();
  return {cfg, std::vector<double>(ParamLayout(cfg).total, 0.0)};
}

EncoderParams init_params(const EncoderConfig& cfg) {
  EncoderParams p = zero_params(cfg);
  const ParamLayout L(cfg);
  Rng rng(cfg.init_seed);
  auto fill = [&](std::size_t off, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) p.values[off + i] = rng.uniform(-a, a);
  };
  fill(L.embed_w, cfg.D, cfg.E);
  fill(L.wq, cfg.E, cfg.E);
  fill(L.wk, cfg.E, cfg.E);
  fill(L.wv, cfg.E, cfg.E);
  fill(L.head1_w, cfg.E, cfg.E);
  fill(L.head2_w, cfg.E, cfg.k);
  return p;
}

namespace {

double activate(double x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
  }
  return x;
}

// Derivative expressed through the pre-activation x and output y.
double activate_grad(double x, double y, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kSigmoid:
      return y * (1.0 - y);
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

// out[r, :] (+)= in[r, :] * W for a row-major (rows x n) by (n x m) product.
void matmul_acc(const double* in, std::size_t rows, std::size_t n, const double* W, std::size_t m,
                double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out + r * m;
    const double* x = in + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i];
      const double* w = W + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += xi * w[j];
    }
  }
}

// dW (n x m) += in^T (n x rows) * g (rows x m)
void outer_acc(const double* in, std::size_t rows, std::size_t n, const double* g, std::size_t m,
               double* dW) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * n;
    const double* gr = g + r * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x[i];
      double* d = dW + i * m;
      for (std::size_t j = 0; j < m; ++j) d[j] += xi * gr[j];
    }
  }
}

// gin[r, :] (+)= g[r, :] * W^T, W is (n x m), g is (rows x m).
void matmul_t_acc(const double* g, std::size_t rows, std::size_t m, const double* W, std::size_t n,
                  double* gin) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gr = g + r * m;
    double* o = gin + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double* w = W + i * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += w[j] * gr[j];
      o[i] += acc;
    }
  }
}

}  // namespace

RelaxedCode forward(const EncoderParams& p, const FeatureSequence& x, ForwardCache* cache) {
  const EncoderConfig& cfg = p.cfg;
  const ParamLayout L(cfg);
  if (p.values.size() != L.total) throw std::invalid_argument("forward: parameter size mismatch");
  if (x.D != cfg.D || x.T == 0 || x.values.size() != x.T * x.D) {
    throw std::invalid_argument("forward: feature dimension " + std::to_string(x.D) +
                                " does not match encoder D=" + std::to_string(cfg.D));
  }
  const std::size_t T = x.T, D = cfg.D, E = cfg.E, k = cfg.k;
  const double* P = p.values.data();

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.T = T;
  c.x = x.values;
  c.z.assign(T * E, 0.0);
  for (std::size_t t = 0; t < T; ++t) std::copy(P + L.embed_b, P + L.embed_b + E, c.z.begin() + t * E);
  matmul_acc(c.x.data(), T, D, P + L.embed_w, E, c.z.data());

  c.q.assign(T * E, 0.0);
  c.key.assign(T * E, 0.0);
  c.v.assign(T * E, 0.0);
  matmul_acc(c.z.data(), T, E, P + L.wq, E, c.q.data());
  matmul_acc(c.z.data(), T, E, P + L.wk, E, c.key.data());
  matmul_acc(c.z.data(), T, E, P + L.wv, E, c.v.data());

  const double scale = 1.0 / std::sqrt(static_cast<double>(E));
  c.attn.assign(T * T, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    double* row = c.attn.data() + i * T;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < T; ++j) {
      double s = 0.0;
      for (std::size_t e = 0; e < E; ++e) s += c.q[i * E + e] * c.key[j * E + e];
      row[j] = s * scale;
      mx = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < T; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < T; ++j) row[j] /= sum;
  }

  // Residual attention output, mean-pooled over time.
  c.pooled.assign(E, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t e = 0; e < E; ++e) {
      double o = 0.0;
      for (std::size_t j = 0; j < T; ++j) o += c.attn[i * T + j] * c.v[j * E + e];
      c.pooled[e] += c.z[i * E + e] + o;
    }
  }
  for (auto& v : c.pooled) v /= static_cast<double>(T);

  c.u.assign(P + L.head1_b, P + L.head1_b + E);
  matmul_acc(c.pooled.data(), 1, E, P + L.head1_w, E, c.u.data());
  c.a.resize(E);
  const Activation hid = cfg.hidden_activation();
  for (std::size_t e = 0; e < E; ++e) c.a[e] = activate(c.u[e], hid);

  c.w.assign(P + L.head2_b, P + L.head2_b + k);
  matmul_acc(c.a.data(), 1, E, P + L.head2_w, k, c.w.data());
  c.out.resize(k);
  for (std::size_t j = 0; j < k; ++j) c.out[j] = activate(c.w[j], cfg.activation);

  return RelaxedCode{c.out, cfg.activation};
}

void backward(const EncoderParams& p, const ForwardCache& c, std::span<const double> upstream,
              std::span<double> grads) {
  const EncoderConfig& cfg = p.cfg;
  const ParamLayout L(cfg);
  const std::size_t T = c.T, D = cfg.D, E = cfg.E, k = cfg.k;
  if (upstream.size() != k) throw std::invalid_argument("backward: upstream length must equal k");
  if (grads.size() != L.total) throw std::invalid_argument("backward: gradient buffer size mismatch");
  if (c.out.size() != k || c.x.size() != T * D) throw std::invalid_argument("backward: stale forward cache");
  const double* P = p.values.data();
  double* G = grads.data();

  std::vector<double> g_w(k);
  for (std::size_t j = 0; j < k; ++j) g_w[j] = upstream[j] * activate_grad(c.w[j], c.out[j], cfg.activation);
  outer_acc(c.a.data(), 1, E, g_w.data(), k, G + L.head2_w);
  for (std::size_t j = 0; j < k; ++j) G[L.head2_b + j] += g_w[j];

  std::vector<double> g_u(E, 0.0);
  matmul_t_acc(g_w.data(), 1, k, P + L.head2_w, E, g_u.data());
  for (std::size_t e = 0; e < E; ++e) g_u[e] *= activate_grad(c.u[e], c.a[e], cfg.hidden_activation());
  outer_acc(c.pooled.data(), 1, E, g_u.data(), E, G + L.head1_w);
  for (std::size_t e = 0; e < E; ++e) G[L.head1_b + e] += g_u[e];

  std::vector<double> g_pool(E, 0.0);
  matmul_t_acc(g_u.data(), 1, E, P + L.head1_w, E, g_pool.data());

  // Every time step receives g_pool / T through the mean; the residual passes
  // it straight to z, the attention branch through O = A V.
  const double invT = 1.0 / static_cast<double>(T);
  std::vector<double> g_o(E);
  for (std::size_t e = 0; e < E; ++e) g_o[e] = g_pool[e] * invT;

  std::vector<double> g_z(T * E);
  for (std::size_t t = 0; t < T; ++t) std::copy(g_o.begin(), g_o.end(), g_z.begin() + t * E);

  // dA[i, j] = g_o . v[j] (identical for every row i); dV[j] = sum_i A[i, j] g_o.
  std::vector<double> g_v(T * E, 0.0);
  std::vector<double> gov(T, 0.0);
  for (std::size_t j = 0; j < T; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < T; ++i) col += c.attn[i * T + j];
    double dot = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
      g_v[j * E + e] = col * g_o[e];
      dot += g_o[e] * c.v[j * E + e];
    }
    gov[j] = dot;
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(E));
  std::vector<double> g_s(T * T);
  for (std::size_t i = 0; i < T; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < T; ++j) mean += c.attn[i * T + j] * gov[j];
    for (std::size_t j = 0; j < T; ++j) g_s[i * T + j] = c.attn[i * T + j] * (gov[j] - mean) * scale;
  }

  std::vector<double> g_q(T * E, 0.0), g_k(T * E, 0.0);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      const double s = g_s[i * T + j];
      if (s == 0.0) continue;
      for (std::size_t e = 0; e < E; ++e) {
        g_q[i * E + e] += s * c.key[j * E + e];
        g_k[j * E + e] += s * c.q[i * E + e];
      }
    }
  }

  outer_acc(c.z.data(), T, E, g_q.data(), E, G + L.wq);
  outer_acc(c.z.data(), T, E, g_k.data(), E, G + L.wk);
  outer_acc(c.z.data(), T, E, g_v.data(), E, G + L.wv);
  matmul_t_acc(g_q.data(), T, E, P + L.wq, E, g_z.data());
  matmul_t_acc(g_k.data(), T, E, P + L.wk, E, g_z.data());
  matmul_t_acc(g_v.data(), T, E, P + L.wv, E, g_z.data());

  outer_acc(c.x.data(), T, D, g_z.data(), E, G + L.embed_w);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < E; ++e) G[L.embed_b + e] += g_z[t * E + e];
  }
}

EncoderGrads backward(const EncoderParams& p, const FeatureSequence& x,
                      std::span<const double> upstream) {
  ForwardCache cache;
  forward(p, x, &cache);
  EncoderGrads g(p.values.size(), 0.0);
  backward(p, cache, upstream, g);
  return g;
}

namespace {

struct Probe {
  double value;
  std::vector<bool> pattern;  // relu on/off for every head unit
};

Probe probe(const EncoderParams& p, const FeatureSequence& x, std::span<const double> upstream) {
  ForwardCache c;
  forward(p, x, &c);
  Probe out{0.0, {}};
  for (std::size_t j = 0; j < c.out.size(); ++j) out.value += upstream[j] * c.out[j];
  if (p.cfg.hidden_activation() == Activation::kRelu) {
    for (double u : c.u) out.pattern.push_back(u > 0.0);
  }
  if (p.cfg.activation == Activation::kRelu) {
    for (double w : c.w) out.pattern.push_back(w > 0.0);
  }
  return out;
}

}  // namespace

GradCheckResult grad_check(const EncoderParams& p, const FeatureSequence& x, double eps,
                           std::uint64_t seed, std::size_t max_params) {
  Rng rng(seed);
  std::vector<double> upstream(p.cfg.k);
  for (auto& u : upstream) u = rng.uniform(-1.0, 1.0);
  const EncoderGrads analytic = backward(p, x, upstream);

  std::vector<std::size_t> indices(p.values.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  if (indices.size() > max_params) {
    rng.shuffle(indices);
    indices.resize(max_params);
    std::sort(indices.begin(), indices.end());
  }

  GradCheckResult result;
  EncoderParams work = p;
  for (std::size_t i : indices) {
    const double orig = work.values[i];
    work.values[i] = orig + eps;
    const Probe plus = probe(work, x, upstream);
    work.values[i] = orig - eps;
    const Probe minus = probe(work, x, upstream);
    work.values[i] = orig;
    if (plus.pattern != minus.pattern) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
    ++result.checked;
  }
  return result;
}

namespace {
constexpr char kParamMagic[4] = {'V', 'T', 'H', 'P'};
constexpr std::uint8_t kParamVersion = 1;
constexpr std::uint32_t kHiddenFollowsOutput = 0xffffffffu;
}  // namespace

std::vector<std::uint8_t> serialize_params(const EncoderParams& p) {
  ByteWriter w;
  w.raw(std::string_view(kParamMagic, 4));
  w.u8(kParamVersion);
  w.u32(p.cfg.D);
  w.u32(p.cfg.E);
  w.u32(p.cfg.k);
  w.u32(p.cfg.T);
  w.u32(static_cast<std::uint32_t>(p.cfg.activation));
  w.u32(p.cfg.init_seed);
  w.u32(p.cfg.hidden ? static_cast<std::uint32_t>(*p.cfg.hidden) : kHiddenFollowsOutput);
  for (double v : p.values) w.f64(v);
  return w.data();
}

EncoderParams deserialize_params(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  const auto magic = r.bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kParamMagic)) r.fail("bad magic", 0);
  const std::size_t vpos = r.offset();
  if (r.u8() != kParamVersion) r.fail("unsupported version", vpos);
  EncoderConfig cfg;
  cfg.D = r.u32();
  cfg.E = r.u32();
  cfg.k = r.u32();
  cfg.T = r.u32();
  const std::size_t apos = r.offset();
  const std::uint32_t act = r.u32();
  if (act > 2) r.fail("bad activation code", apos);
  cfg.activation = static_cast<Activation>(act);
  cfg.init_seed = r.u32();
  const std::size_t hpos = r.offset();
  const std::uint32_t hid = r.u32();
  if (hid > 2 && hid != kHiddenFollowsOutput) r.fail("bad hidden activation code", hpos);
  if (hid != kHiddenFollowsOutput) cfg.hidden = static_cast<Activation>(hid);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(e.what(), 5);
  }
  EncoderParams p = zero_params(cfg);
  if (r.remaining() != p.values.size() * 8) {
    r.fail("expected " + std::to_string(p.values.size() * 8) + " weight bytes, found " +
               std::to_string(r.remaining()),
           r.offset());
  }
  for (auto& v : p.values) {
    const std::size_t at = r.offset();
    v = r.f64();
    if (!std::isfinite(v)) r.fail("non-finite weight", at);
  }
  return p;
}

void save_params(const EncoderParams& p, const std::string& path) {
  write_file_bytes(path, serialize_params(p));
}

EncoderParams load_params(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return deserialize_params(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace hashtrace
