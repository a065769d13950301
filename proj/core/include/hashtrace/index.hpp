#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hashtrace/encoder.hpp"
#include "hashtrace/hash_code.hpp"
#include "hashtrace/image.hpp"
#include "hashtrace/loss.hpp"

namespace hashtrace {

struct GroupMeta {
  std::uint32_t group_id = 0;
  std::string label;
  std::string original_ref;
};

struct IndexEntry {
  std::uint32_t group_id = 0;
  HashCode center;
  std::string label;
  std::string original_ref;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct TraceResult {
  std::uint32_t group_id = 0;
  std::string label;
  std::string original_ref;
  std::size_t distance = 0;
  std::optional<std::size_t> runner_up_distance;  // empty for a one-entry index
};

/// Immutable center store. Centers are also kept in one contiguous word array
/// so a trace is a single linear popcount scan.
class TraceIndex {
 public:
  TraceIndex(std::size_t k, std::vector<IndexEntry> entries);

  std::size_t k() const { return k_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  /// Minimum Hamming distance; ties go to the smallest group_id.
  TraceResult trace(const HashCode& code) const;

  friend bool operator==(const TraceIndex& a, const TraceIndex& b) {
    return a.k_ == b.k_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t k_;
  std::size_t words_;
  std::vector<IndexEntry> entries_;
  std::vector<std::uint64_t> flat_;
};

TraceIndex build_index(const CenterSet& centers, std::span<const GroupMeta> meta);

/// "VTHX" v1: u16 k, u32 n, then per entry u32 id, k/8 center bytes, u16-prefixed label and ref.
std::vector<std::uint8_t> serialize_index(const TraceIndex& idx);
TraceIndex deserialize_index(std::span<const std::uint8_t> bytes);
void save_index(const TraceIndex& idx, const std::string& path);
TraceIndex load_index(const std::string& path);

/// Bytes spent on ids and centers: n * (32 + k) / 8.
std::size_t index_payload_bytes(std::size_t n, std::size_t k);
inline constexpr std::size_t kIndexHeaderBytes = 4 + 1 + 2 + 4;

struct BenchmarkReport {
  double encode_time_mean = 0.0;  // t: descriptors + forward, seconds
  double lookup_time_mean = 0.0;  // lambda: binarize + trace, seconds
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t queries = 0;

  double ratio() const { return lookup_time_mean / encode_time_mean; }
  bool lookup_negligible() const { return lookup_time_mean < 0.05 * encode_time_mean; }
};

/// Each query is one clip of raw frames. Needs at least 100 queries.
BenchmarkReport benchmark_trace(const TraceIndex& idx, const EncoderParams& params,
                                std::span<const Frames> queries);

}  // namespace hashtrace
