#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "escort/csr.hpp"
#include "escort/weight_io.hpp"

namespace escort {
namespace {

std::size_t zeros(const Tensor4D& t) {
  return static_cast<std::size_t>(std::count(t.values().begin(), t.values().end(), 0.0f));
}

TEST(DenseToCsr, AllZero) {
  const CsrMatrix a = dense_to_csr(Tensor4D({2, 1, 2, 2}));
  EXPECT_EQ(a.nnz(), 0u);
  EXPECT_EQ(a.rowptr, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(sparsity(a), 1.0);
  EXPECT_EQ(csr_violation(a), "");
}

TEST(DenseToCsr, Identity) {
  Tensor4D eye({3, 3, 1, 1});
  for (std::size_t i = 0; i < 3; ++i) eye(i, i, 0, 0) = 1.0f;
  const CsrMatrix a = dense_to_csr(eye);
  EXPECT_EQ(a.rowptr, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(a.colidx, (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(a.value, (std::vector<float>{1, 1, 1}));
}

TEST(DenseToCsr, RoundTripIsExact) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Tensor4D w = prune_by_magnitude(random_tensor({8, 4, 3, 3}, seed), 0.6);
    const CsrMatrix a = dense_to_csr(w);
    EXPECT_EQ(csr_violation(a), "");
    EXPECT_EQ(csr_to_dense(a, w.dims()), w);
    // Row i is filter i in (c, r, s) order.
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = a.rowptr[i]; j < a.rowptr[i + 1]; ++j) {
        const std::size_t col = a.colidx[j];
        EXPECT_EQ(a.value[j], w(i, col / 9, (col / 3) % 3, col % 3));
      }
  }
}

TEST(Prune, ZeroTargetIsIdentity) {
  const Tensor4D w = random_tensor({4, 3, 3, 3}, 3);
  EXPECT_EQ(prune_by_magnitude(w, 0.0), w);
}

TEST(Prune, SmallestMagnitudesGoFirst) {
  const Tensor4D w({1, 1, 1, 4}, std::vector<float>{1, -2, 3, -4});
  EXPECT_EQ(prune_by_magnitude(w, 0.5).values(), (std::vector<float>{0, 0, 3, -4}));
}

TEST(Prune, TiesBreakTowardLowerIndex) {
  const Tensor4D w({1, 1, 1, 5}, std::vector<float>{2, -1, 1, 1, -3});
  // Three of the four smallest tie at |1|; indices 1 and 2 go first.
  EXPECT_EQ(prune_by_magnitude(w, 0.4).values(), (std::vector<float>{2, 0, 0, 1, -3}));
}

TEST(Prune, AchievedSparsityWithinOneElement) {
  for (double target : {0.5, 0.8, 0.9, 0.95, 0.37}) {
    const Tensor4D w = random_tensor({7, 5, 3, 3}, 11);
    const Tensor4D p = prune_by_magnitude(w, target);
    const double total = static_cast<double>(w.size());
    const double got = static_cast<double>(zeros(p)) / total;
    EXPECT_GE(got, target);
    EXPECT_LE(got, target + 1.0 / total);
    EXPECT_NEAR(sparsity(dense_to_csr(p)), got, 1e-12);
  }
}

TEST(Prune, Idempotent) {
  const Tensor4D w = random_tensor({6, 4, 3, 3}, 12);
  const Tensor4D once = prune_by_magnitude(w, 0.8);
  EXPECT_EQ(prune_by_magnitude(once, 0.8), once);
}

TEST(Prune, RejectsOutOfRangeTarget) {
  const Tensor4D w = random_tensor({1, 1, 2, 2}, 1);
  EXPECT_THROW(prune_by_magnitude(w, 1.0), std::invalid_argument);
  EXPECT_THROW(prune_by_magnitude(w, -0.1), std::invalid_argument);
}

TEST(Sparsity, Arithmetic) {
  CsrMatrix a;
  a.rows = 10;
  a.kernel_cols = 100;
  a.value.resize(150);
  EXPECT_DOUBLE_EQ(sparsity(a), 0.85);
  const CsrMatrix dense = dense_to_csr(Tensor4D({2, 2, 1, 1}, 1.0f));
  EXPECT_EQ(sparsity(dense), 0.0);
}

TEST(Footprint, Formula) {
  EXPECT_EQ(csr_footprint_bytes(0, 1), 8u);
  EXPECT_EQ(csr_footprint_bytes(100, 10), 844u);
}

TEST(Footprint, BelowFortyPercentOfDenseWhenHighlySparse) {
  for (double target : {0.81, 0.85, 0.9, 0.95}) {
    const CsrMatrix a = dense_to_csr(prune_by_magnitude(random_tensor({64, 64, 3, 3}, 5), target));
    ASSERT_GT(sparsity(a), 0.8);
    ASSERT_LT(a.rows * 10, a.nnz());
    EXPECT_LT(static_cast<double>(csr_footprint_bytes(a)), 0.4 * 4.0 * static_cast<double>(a.rows * a.kernel_cols));
  }
}

TEST(Footprint, MatchesPayloadUnderFourByteModel) {
  const CsrMatrix a = dense_to_csr(prune_by_magnitude(random_tensor({5, 3, 3, 3}, 2), 0.7));
  const std::size_t payload = 4 * (a.value.size() + a.colidx.size() + a.rowptr.size());
  EXPECT_EQ(csr_footprint_bytes(a), payload);
}

TEST(Stretch, OneByOneSingleChannelUnchanged) {
  const ConvShape sh(1, 2, 1, 5, 5, 1, 1);
  const CsrMatrix a = dense_to_csr(Tensor4D({2, 1, 1, 1}, 3.0f));
  EXPECT_EQ(stretch_weights(a, sh).colidx, a.colidx);
}

TEST(Stretch, KernelIndexFiveOnSixBySix) {
  const ConvShape sh(1, 1, 1, 6, 6, 3, 3);
  Tensor4D w({1, 1, 3, 3});
  w(0, 0, 1, 2) = 1.5f;  // kernel index 5
  const CsrMatrix a = dense_to_csr(w);
  ASSERT_EQ(a.colidx, (std::vector<std::uint32_t>{5}));
  EXPECT_EQ(stretch_weights(a, sh).colidx, (std::vector<std::uint32_t>{8}));
}

TEST(Stretch, PreservesStructureAndOrder) {
  const ConvShape sh(1, 12, 5, 9, 7, 3, 2, 1, 2);
  const CsrMatrix a = dense_to_csr(prune_by_magnitude(random_tensor(sh.weight_dims(), 4), 0.5));
  const CsrMatrix b = stretch_weights(a, sh);
  EXPECT_EQ(b.rowptr, a.rowptr);
  EXPECT_EQ(b.value, a.value);
  EXPECT_EQ(b.nnz(), a.nnz());
  EXPECT_EQ(csr_violation(b), "");
  EXPECT_EQ(b.cols, 5u * 13 * 11);
  ASSERT_TRUE(b.stretched());
  EXPECT_EQ(*b.stretch, (StretchDims{13, 11}));
  for (std::size_t j = 0; j < a.nnz(); ++j) {
    const std::size_t k = a.colidx[j];
    EXPECT_EQ(b.colidx[j], layout_f(k / 6, (k / 2) % 3, k % 2, 13, 11));
  }
  EXPECT_DOUBLE_EQ(sparsity(b), sparsity(a));
}

TEST(Stretch, RejectsStretchedOrMismatchedInput) {
  const ConvShape sh(1, 2, 2, 6, 6, 3, 3);
  const CsrMatrix a = dense_to_csr(random_tensor(sh.weight_dims(), 1));
  const CsrMatrix b = stretch_weights(a, sh);
  EXPECT_THROW(stretch_weights(b, sh), std::invalid_argument);
  EXPECT_THROW(stretch_weights(a, ConvShape(1, 2, 3, 6, 6, 3, 3)), std::invalid_argument);
}

TEST(CsrViolation, ReportsEachInvariant) {
  CsrMatrix a = dense_to_csr(random_tensor({3, 2, 2, 2}, 9));
  ASSERT_EQ(csr_violation(a), "");
  CsrMatrix bad = a;
  bad.rowptr[1] = bad.rowptr[2] + 1;
  EXPECT_NE(csr_violation(bad).find("non-decreasing"), std::string::npos);
  bad = a;
  std::swap(bad.colidx[0], bad.colidx[1]);
  EXPECT_NE(csr_violation(bad).find("strictly increasing"), std::string::npos);
  bad = a;
  bad.value[0] = 0.0f;
  EXPECT_NE(csr_violation(bad).find("zero"), std::string::npos);
  bad = a;
  bad.colidx.back() = static_cast<std::uint32_t>(bad.cols);
  EXPECT_NE(csr_violation(bad).find("out of range"), std::string::npos);
}

}  // namespace
}  // namespace escort
