#include "hashtrace/index.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <set>
#include <stdexcept>

#if defined(__x86_64__)
#include <immintrin.h>
#endif

#include "hashtrace/binary_io.hpp"

namespace hashtrace {

TraceIndex::TraceIndex(std::size_t k, std::vector<IndexEntry> entries)
    : k_(k), words_((k + 63) / 64), entries_(std::move(entries)) {
  if (k == 0 || k % 8 != 0 || k > 0xffff) {
    throw std::invalid_argument("index: k must be a positive multiple of 8 below 65536");
  }
  if (entries_.empty()) throw std::invalid_argument("index: no entries");
  std::sort(entries_.begin(), entries_.end(),
            [](const IndexEntry& a, const IndexEntry& b) { return a.group_id < b.group_id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i > 0 && entries_[i].group_id == entries_[i - 1].group_id) {
      throw std::invalid_argument("index: duplicate group " + std::to_string(entries_[i].group_id));
    }
    if (entries_[i].center.size() != k) {
      throw std::invalid_argument("index: center of group " + std::to_string(entries_[i].group_id) +
                                  " has " + std::to_string(entries_[i].center.size()) + " bits, expected " +
                                  std::to_string(k));
    }
    if (entries_[i].label.size() > 0xffff || entries_[i].original_ref.size() > 0xffff) {
      throw std::invalid_argument("index: label or ref longer than 65535 bytes");
    }
  }
  flat_.reserve(entries_.size() * words_);
  for (const auto& e : entries_) {
    const auto w = e.center.words();
    flat_.insert(flat_.end(), w.begin(), w.end());
  }
}

namespace {

struct ScanResult {
  std::size_t best = 0;
  std::size_t best_d = SIZE_MAX;
  std::size_t second_d = SIZE_MAX;

  // Rows arrive in id order, so strict < keeps the smallest id on ties.
  void offer(std::size_t i, std::size_t d) {
    if (d < best_d) {
      second_d = best_d;
      best_d = d;
      best = i;
    } else if (d < second_d) {
      second_d = d;
    }
  }
};

ScanResult scan_scalar(const std::uint64_t* q, const std::uint64_t* rows, std::size_t n, std::size_t words) {
  ScanResult r;
  const std::span<const std::uint64_t> qs(q, words);
  for (std::size_t i = 0; i < n; ++i, rows += words) r.offer(i, hamming_words(qs, rows));
  return r;
}

#if defined(__x86_64__) && defined(__GNUC__)
#define HASHTRACE_HAVE_AVX512_SCAN 1
__attribute__((target("avx512f,avx512vpopcntdq"))) ScanResult scan_avx512(const std::uint64_t* q,
                                                                          const std::uint64_t* rows, std::size_t n,
                                                                          std::size_t words) {
  ScanResult r;
  const std::size_t full = words & ~std::size_t{7};
  for (std::size_t i = 0; i < n; ++i, rows += words) {
    __m512i acc = _mm512_setzero_si512();
    for (std::size_t w = 0; w < full; w += 8) {
      const __m512i x = _mm512_xor_si512(_mm512_loadu_si512(q + w), _mm512_loadu_si512(rows + w));
      acc = _mm512_add_epi64(acc, _mm512_popcnt_epi64(x));
    }
    std::size_t d = static_cast<std::size_t>(_mm512_reduce_add_epi64(acc));
    for (std::size_t w = full; w < words; ++w) d += static_cast<std::size_t>(std::popcount(q[w] ^ rows[w]));
    r.offer(i, d);
  }
  return r;
}
#endif

using ScanFn = ScanResult (*)(const std::uint64_t*, const std::uint64_t*, std::size_t, std::size_t);

// Vector popcount pays off once a row spans a full 512-bit register.
ScanFn pick_scan(std::size_t words) {
#ifdef HASHTRACE_HAVE_AVX512_SCAN
  static const bool avx512 = __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512vpopcntdq");
  if (avx512 && words >= 8) return scan_avx512;
#endif
  (void)words;
  return scan_scalar;
}

}  // namespace

TraceResult TraceIndex::trace(const HashCode& code) const {
  if (code.size() != k_) {
    throw std::invalid_argument("trace: query has " + std::to_string(code.size()) +
                                " bits, index has " + std::to_string(k_));
  }
  const ScanResult s = pick_scan(words_)(code.words().data(), flat_.data(), entries_.size(), words_);
  TraceResult r;
  r.group_id = entries_[s.best].group_id;
  r.label = entries_[s.best].label;
  r.original_ref = entries_[s.best].original_ref;
  r.distance = s.best_d;
  if (entries_.size() > 1) r.runner_up_distance = s.second_d;
  return r;
}

TraceIndex build_index(const CenterSet& centers, std::span<const GroupMeta> meta) {
  if (centers.empty()) throw std::invalid_argument("build_index: empty center set");
  std::set<std::uint32_t> seen;
  for (const auto& m : meta) {
    if (!seen.insert(m.group_id).second) {
      throw std::invalid_argument("build_index: duplicate metadata for group " + std::to_string(m.group_id));
    }
  }
  std::vector<IndexEntry> entries;
  for (const auto& [id, center] : centers.entries()) {
    auto it = std::find_if(meta.begin(), meta.end(), [id = id](const GroupMeta& m) { return m.group_id == id; });
    if (it == meta.end()) {
      throw std::invalid_argument("build_index: no metadata for group " + std::to_string(id));
    }
    entries.push_back({id, center, it->label, it->original_ref});
  }
  return TraceIndex(centers.k(), std::move(entries));
}

namespace {
constexpr char kIndexMagic[4] = {'V', 'T', 'H', 'X'};
constexpr std::uint8_t kIndexVersion = 1;
}  // namespace

std::size_t index_payload_bytes(std::size_t n, std::size_t k) { return n * (32 + k) / 8; }

std::vector<std::uint8_t> serialize_index(const TraceIndex& idx) {
  ByteWriter w;
  w.raw(std::string_view(kIndexMagic, 4));
  w.u8(kIndexVersion);
  w.u16(static_cast<std::uint16_t>(idx.k()));
  w.u32(static_cast<std::uint32_t>(idx.size()));
  for (const auto& e : idx.entries()) {
    w.u32(e.group_id);
    w.bytes(e.center.to_bytes());
    w.u16(static_cast<std::uint16_t>(e.label.size()));
    w.raw(e.label);
    w.u16(static_cast<std::uint16_t>(e.original_ref.size()));
    w.raw(e.original_ref);
  }
  return w.data();
}

TraceIndex deserialize_index(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "index");
  const auto magic = r.bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kIndexMagic)) r.fail("bad magic", 0);
  if (r.u8() != kIndexVersion) r.fail("unsupported version", 4);
  const std::size_t k = r.u16();
  if (k == 0 || k % 8 != 0) r.fail("k must be a positive multiple of 8", 5);
  const std::uint32_t n = r.u32();
  std::vector<IndexEntry> entries;
  for (std::uint32_t i = 0; i < n; ++i) {
    IndexEntry e;
    const std::size_t at = r.offset();
    e.group_id = r.u32();
    e.center = HashCode::from_bytes(r.bytes(k / 8, "center"), k);
    const auto label = r.bytes(r.u16(), "label");
    e.label.assign(label.begin(), label.end());
    const auto ref = r.bytes(r.u16(), "original_ref");
    e.original_ref.assign(ref.begin(), ref.end());
    if (!entries.empty() && entries.back().group_id >= e.group_id) {
      r.fail("entries not strictly sorted by group_id", at);
    }
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) r.fail("trailing bytes", r.offset());
  try {
    return TraceIndex(k, std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("index: ") + e.what());
  }
}

void save_index(const TraceIndex& idx, const std::string& path) {
  write_file_bytes(path, serialize_index(idx));
}

TraceIndex load_index(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return deserialize_index(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

BenchmarkReport benchmark_trace(const TraceIndex& idx, const EncoderParams& params,
                                std::span<const Frames> queries) {
  if (queries.size() < 100) throw std::invalid_argument("benchmark_trace: need at least 100 queries");
  if (params.cfg.k != idx.k()) throw std::invalid_argument("benchmark_trace: encoder k differs from index k");
  using clock = std::chrono::steady_clock;
  std::vector<RelaxedCode> codes;
  codes.reserve(queries.size());

  const auto t0 = clock::now();
  for (const auto& clip : queries) {
    FeatureSequence seq(clip.size(), kDescriptorDim);
    for (std::size_t t = 0; t < clip.size(); ++t) {
      const auto d = extract_descriptor(clip[t]);
      std::copy(d.begin(), d.end(), seq.row(t).begin());
    }
    codes.push_back(forward(params, seq));
  }
  const auto t1 = clock::now();
  std::size_t sink = 0;
  for (const auto& c : codes) sink += idx.trace(binarize(c)).distance;
  const auto t2 = clock::now();
  if (sink == SIZE_MAX) throw std::logic_error("unreachable");

  BenchmarkReport rep;
  rep.n = idx.size();
  rep.k = idx.k();
  rep.queries = queries.size();
  const double q = static_cast<double>(queries.size());
  rep.encode_time_mean = std::chrono::duration<double>(t1 - t0).count() / q;
  rep.lookup_time_mean = std::chrono::duration<double>(t2 - t1).count() / q;
  return rep;
}

}  // namespace hashtrace
