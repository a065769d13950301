#include "hashtrace/hash_code.hpp"

#include <algorithm>
#include <stdexcept>

namespace hashtrace {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kRelu:
      return "relu";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

HashCode::HashCode(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {
  if (bits == 0) throw std::invalid_argument("hash code length must be positive");
}

HashCode HashCode::from_bits(std::span<const int> bits) {
  HashCode code(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) {
      throw std::invalid_argument("hash code bits must be 0 or 1");
    }
    code.set(i, bits[i] == 1);
  }
  return code;
}

HashCode HashCode::from_string(std::string_view bits) {
  HashCode code(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') {
      throw std::invalid_argument("hash code string must contain only 0/1");
    }
    code.set(i, bits[i] == '1');
  }
  return code;
}

HashCode HashCode::from_bytes(std::span<const std::uint8_t> bytes, std::size_t bits) {
  HashCode code(bits);
  if (bytes.size() != (bits + 7) / 8) {
    throw std::invalid_argument("byte count does not match code length");
  }
  for (std::size_t j = 0; j < bytes.size(); ++j) {
    code.words_[j / 8] |= std::uint64_t{bytes[j]} << (56 - 8 * (j % 8));
  }
  // Drop padding bits beyond the code length.
  if (bits % 64 != 0) {
    code.words_.back() &= ~std::uint64_t{0} << (64 - bits % 64);
  }
  return code;
}

std::vector<std::uint8_t> HashCode::to_bytes() const {
  std::vector<std::uint8_t> out((bits_ + 7) / 8);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = static_cast<std::uint8_t>(words_[j / 8] >> (56 - 8 * (j % 8)));
  }
  return out;
}

std::string HashCode::to_string() const {
  std::string s(bits_, '0');
  for (std::size_t i = 0; i < bits_; ++i) {
    if (bit(i)) s[i] = '1';
  }
  return s;
}

std::size_t HashCode::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool binarize_value(double value, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return value >= 0.0;
    case Activation::kSigmoid:
      return value >= 0.5;
    case Activation::kRelu:
      return value > 0.0;
  }
  return false;
}

HashCode binarize(const RelaxedCode& code) {
  const std::size_t k = code.values.size();
  HashCode out(k);
  for (std::size_t w = 0; w * 64 < k; ++w) {
    std::uint64_t word = 0;
    const std::size_t end = std::min(k, w * 64 + 64);
    for (std::size_t i = w * 64; i < end; ++i) {
      word |= static_cast<std::uint64_t>(binarize_value(code.values[i], code.activation)) << (63 - (i & 63));
    }
    out.set_word(w, word);
  }
  return out;
}

std::size_t hamming(const HashCode& a, const HashCode& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("hamming: length mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  return hamming_words(a.words(), b.words().data());
}

HashCode vote_center(std::span<const HashCode> codes, const HashCode& anchor) {
  if (codes.empty()) throw std::invalid_argument("vote_center: empty code list");
  const std::size_t k = anchor.size();
  for (const auto& c : codes) {
    if (c.size() != k) throw std::invalid_argument("vote_center: mixed code lengths");
  }
  std::vector<std::size_t> ones(k, 0);
  for (const auto& c : codes) {
    for (std::size_t i = 0; i < k; ++i) ones[i] += c.bit(i);
  }
  HashCode center(k);
  const std::size_t n = codes.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t twice = 2 * ones[i];
    if (twice > n) {
      center.set(i, true);
    } else if (twice == n) {
      center.set(i, anchor.bit(i));
    }
  }
  return center;
}

double mean_pairwise_hamming(std::span<const HashCode> centers) {
  if (centers.size() < 2) {
    throw std::invalid_argument("mean_pairwise_hamming: need at least 2 centers");
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::size_t j = i + 1; j < centers.size(); ++j) {
      total += static_cast<double>(hamming(centers[i], centers[j]));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace hashtrace
