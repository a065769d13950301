#include <gtest/gtest.h>

#include <algorithm>
#include <stdexcept>

#include "hashtrace/hash_code.hpp"
#include "support.hpp"

namespace hashtrace {
namespace {

using testing::random_code;

HashCode bits(std::initializer_list<int> b) {
  const std::vector<int> v(b);
  return HashCode::from_bits(v);
}

TEST(Binarize, TanhSignWithZeroAsOne) {
  const HashCode c = binarize({{0.3, -0.2, 0.0, 0.9}, Activation::kTanh});
  EXPECT_EQ(c, bits({1, 0, 1, 1}));
}

TEST(Binarize, SigmoidThresholdInclusive) {
  const HashCode c = binarize({{0.6, 0.4, 0.5, 0.1}, Activation::kSigmoid});
  EXPECT_EQ(c, bits({1, 0, 1, 0}));
}

TEST(Binarize, ReluStrictlyPositive) {
  const HashCode c = binarize({{0.0, 0.7, 0.0, 2.1}, Activation::kRelu});
  EXPECT_EQ(c, bits({0, 1, 0, 1}));
}

TEST(Binarize, IdempotentUnderSigmoid) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(200);
    const HashCode c = random_code(rng, k);
    RelaxedCode r{std::vector<double>(k), Activation::kSigmoid};
    for (std::size_t i = 0; i < k; ++i) r.values[i] = c.bit(i) ? 1.0 : 0.0;
    EXPECT_EQ(binarize(r), c);
  }
}

TEST(HashCodeLayout, BytesAreMsbFirst) {
  HashCode c(16);
  c.set(0, true);
  c.set(9, true);
  const auto bytes = c.to_bytes();
  ASSERT_EQ(bytes.size(), 2u);
  EXPECT_EQ(bytes[0], 0x80);
  EXPECT_EQ(bytes[1], 0x40);
  EXPECT_EQ(HashCode::from_bytes(bytes, 16), c);
}

TEST(HashCodeLayout, StringAndBytesRoundTrip) {
  Rng rng(11);
  for (std::size_t k : {1u, 7u, 8u, 63u, 64u, 65u, 128u, 200u, 1024u}) {
    const HashCode c = random_code(rng, k);
    EXPECT_EQ(HashCode::from_string(c.to_string()), c);
    EXPECT_EQ(HashCode::from_bytes(c.to_bytes(), k), c);
  }
}

TEST(HashCodeLayout, FromBytesClearsPadding) {
  const std::vector<std::uint8_t> bytes{0xff};
  const HashCode c = HashCode::from_bytes(bytes, 5);
  EXPECT_EQ(c.popcount(), 5u);
  EXPECT_EQ(c, HashCode::from_string("11111"));
}

TEST(HashCodeLayout, RejectsBadInput) {
  EXPECT_THROW(HashCode(0), std::invalid_argument);
  EXPECT_THROW(HashCode::from_string("01x"), std::invalid_argument);
  const std::vector<int> b{0, 2};
  EXPECT_THROW(HashCode::from_bits(b), std::invalid_argument);
  const std::vector<std::uint8_t> bytes{0, 0};
  EXPECT_THROW(HashCode::from_bytes(bytes, 8), std::invalid_argument);
}

TEST(Hamming, Examples) {
  EXPECT_EQ(hamming(bits({1, 0, 1, 1}), bits({1, 0, 1, 1})), 0u);
  EXPECT_EQ(hamming(bits({0, 0, 0, 0}), bits({1, 1, 1, 1})), 4u);
  EXPECT_EQ(hamming(bits({1, 0, 1, 0, 1, 0, 1, 0}), bits({1, 1, 1, 1, 0, 0, 0, 0})), 4u);
}

TEST(Hamming, LengthMismatchThrows) {
  EXPECT_THROW(hamming(HashCode(8), HashCode(16)), std::invalid_argument);
}

TEST(Hamming, IsAMetric) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.below(300);
    const HashCode a = random_code(rng, k), b = random_code(rng, k), c = random_code(rng, k);
    const std::size_t ab = hamming(a, b), bc = hamming(b, c), ac = hamming(a, c);
    EXPECT_EQ(hamming(a, a), 0u);
    EXPECT_EQ(ab, hamming(b, a));
    EXPECT_LE(ab, k);
    EXPECT_LE(ac, ab + bc);
    if (ab == 0) EXPECT_EQ(a, b);
  }
}

TEST(Hamming, MatchesBitwiseCount) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(300);
    const HashCode a = random_code(rng, k), b = random_code(rng, k);
    std::size_t expect = 0;
    for (std::size_t i = 0; i < k; ++i) expect += a.bit(i) != b.bit(i);
    EXPECT_EQ(hamming(a, b), expect);
  }
}

TEST(VoteCenter, Examples) {
  const std::vector<HashCode> codes{bits({1, 0, 1}), bits({1, 1, 1}), bits({0, 0, 1})};
  EXPECT_EQ(vote_center(codes, bits({1, 0, 1})), bits({1, 0, 1}));
  const std::vector<HashCode> tie{bits({1, 1}), bits({0, 0})};
  EXPECT_EQ(vote_center(tie, bits({1, 1})), bits({1, 1}));
  EXPECT_EQ(vote_center(tie, bits({0, 0})), bits({0, 0}));
  const std::vector<HashCode> one{bits({0, 1, 1, 0})};
  EXPECT_EQ(vote_center(one, one[0]), one[0]);
}

TEST(VoteCenter, Errors) {
  const std::vector<HashCode> none;
  EXPECT_THROW(vote_center(none, HashCode(4)), std::invalid_argument);
  const std::vector<HashCode> mixed{HashCode(4), HashCode(5)};
  EXPECT_THROW(vote_center(mixed, HashCode(4)), std::invalid_argument);
}

TEST(VoteCenter, MajorityIsOptimalByBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t k = 1 + rng.below(12);
    const std::size_t n = 1 + rng.below(5);
    std::vector<HashCode> codes;
    for (std::size_t i = 0; i < n; ++i) codes.push_back(random_code(rng, k));
    const HashCode center = vote_center(codes, codes[rng.below(n)]);
    auto cost = [&](const HashCode& c) {
      std::size_t s = 0;
      for (const auto& x : codes) s += hamming(c, x);
      return s;
    };
    const std::size_t got = cost(center);
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
      HashCode cand(k);
      for (std::size_t i = 0; i < k; ++i) cand.set(i, (mask >> i) & 1u);
      ASSERT_LE(got, cost(cand));
    }
  }
}

TEST(VoteCenter, PermutationInvariant) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(100);
    std::vector<HashCode> codes;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) codes.push_back(random_code(rng, k));
    const HashCode anchor = codes[0];
    const HashCode before = vote_center(codes, anchor);
    rng.shuffle(codes);
    EXPECT_EQ(vote_center(codes, anchor), before);
  }
}

TEST(MeanPairwiseHamming, Examples) {
  const std::vector<HashCode> a{bits({0, 0}), bits({1, 1})};
  EXPECT_DOUBLE_EQ(mean_pairwise_hamming(a), 2.0);
  const std::vector<HashCode> b{bits({0, 0}), bits({0, 0}), bits({0, 0})};
  EXPECT_DOUBLE_EQ(mean_pairwise_hamming(b), 0.0);
  const std::vector<HashCode> c{bits({0, 0}), bits({0, 1}), bits({1, 1})};
  EXPECT_NEAR(mean_pairwise_hamming(c), 4.0 / 3.0, 1e-12);
  const std::vector<HashCode> single{bits({0, 1})};
  EXPECT_THROW(mean_pairwise_hamming(single), std::invalid_argument);
}

TEST(Activation, NamesRoundTrip) {
  for (Activation a : {Activation::kTanh, Activation::kSigmoid, Activation::kRelu}) {
    EXPECT_EQ(parse_activation(to_string(a)), a);
  }
  EXPECT_THROW(parse_activation("gelu"), std::invalid_argument);
}

}  // namespace
}  // namespace hashtrace
