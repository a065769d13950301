#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hashtrace {

/// Output nonlinearity of the encoder head; also selects the binarization rule.
enum class Activation : std::uint8_t { kTanh = 0, kSigmoid = 1, kRelu = 2 };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

/// Fixed-length binary code. Bit i lives in word i / 64 at position
/// 63 - i % 64, so the byte view is MSB-first. Tail bits are always zero.
class HashCode {
 public:
  HashCode() = default;
  explicit HashCode(std::size_t bits);

  static HashCode from_bits(std::span<const int> bits);
  /// Parses a string of '0'/'1' characters.
  static HashCode from_string(std::string_view bits);
  /// Inverse of to_bytes(); bit 0 is the MSB of byte 0.
  static HashCode from_bytes(std::span<const std::uint8_t> bytes, std::size_t bits);

  std::size_t size() const { return bits_; }
  bool empty() const { return bits_ == 0; }

  bool bit(std::size_t i) const {
    return (words_[i >> 6] >> (63 - (i & 63))) & 1u;
  }
  void set(std::size_t i, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (63 - (i & 63));
    if (value) {
      words_[i >> 6] |= mask;
    } else {
      words_[i >> 6] &= ~mask;
    }
  }

  std::span<const std::uint64_t> words() const { return words_; }
  /// Bits past size() must be zero.
  void set_word(std::size_t w, std::uint64_t value) { words_[w] = value; }
  std::vector<std::uint8_t> to_bytes() const;
  std::string to_string() const;
  std::size_t popcount() const;

  friend bool operator==(const HashCode&, const HashCode&) = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Real-valued pre-binarization encoder output.
struct RelaxedCode {
  std::vector<double> values;
  Activation activation = Activation::kTanh;
};

/// tanh: value >= 0, sigmoid: value >= 0.5, relu: value > 0.
bool binarize_value(double value, Activation act);
HashCode binarize(const RelaxedCode& code);

/// Number of differing positions. Throws std::invalid_argument on length mismatch.
std::size_t hamming(const HashCode& a, const HashCode& b);

inline std::size_t hamming_words(std::span<const std::uint64_t> a,
                                 const std::uint64_t* b) {
  // Four independent sums keep the popcount units busy on long codes.
  std::size_t d0 = 0, d1 = 0, d2 = 0, d3 = 0;
  const std::size_t n = a.size();
  std::size_t w = 0;
  for (; w + 4 <= n; w += 4) {
    d0 += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
    d1 += static_cast<std::size_t>(std::popcount(a[w + 1] ^ b[w + 1]));
    d2 += static_cast<std::size_t>(std::popcount(a[w + 2] ^ b[w + 2]));
    d3 += static_cast<std::size_t>(std::popcount(a[w + 3] ^ b[w + 3]));
  }
  for (; w < n; ++w) d0 += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
  return d0 + d1 + d2 + d3;
}

/// Per-bit majority over `codes`; exact ties take the anchor's bit.
HashCode vote_center(std::span<const HashCode> codes, const HashCode& anchor);

/// Mean Hamming distance over all unordered pairs; needs at least two codes.
double mean_pairwise_hamming(std::span<const HashCode> centers);

}  // namespace hashtrace
