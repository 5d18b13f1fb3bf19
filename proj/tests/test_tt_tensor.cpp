#include <gtest/gtest.h>

#include <random>

#include "ppx/tt_tensor.hpp"
#include "test_support.hpp"

using namespace ppx;
using ppx::testing::dense_mean;
using ppx::testing::max_abs_diff;
using ppx::testing::random_dense;
using ppx::testing::random_tt;

namespace {

DenseTensor outer3(std::vector<double> a, std::vector<double> b, std::vector<double> c) {
  return DenseTensor::generate({a.size(), b.size(), c.size()}, [&](auto idx) {
    return a[idx[0]] * b[idx[1]] * c[idx[2]];
  });
}

}  // namespace

TEST(FromDense, RankOneOuterProduct) {
  auto t = tt::from_dense(outer3({1, 2}, {3, 4}, {5, 6}), 1e-10);
  EXPECT_EQ(t.ranks(), (std::vector<std::size_t>{1, 1, 1, 1}));
}

TEST(FromDense, ConstantTensorIsRankOneAndExact) {
  DenseTensor c({4, 4, 4}, 7.0);
  auto t = tt::from_dense(c, 1e-10);
  EXPECT_EQ(t.ranks(), (std::vector<std::size_t>{1, 1, 1, 1}));
  auto back = tt::to_dense(t);
  for (double v : back.values()) EXPECT_NEAR(v, 7.0, 1e-13);
}

TEST(FromDense, RandomRoundTrip) {
  std::mt19937_64 rng(1);
  auto d = random_dense({8, 8, 8}, rng);
  auto t = tt::from_dense(d, 1e-10);
  EXPECT_LE(relative_error(tt::to_dense(t), d), 1e-10);
}

TEST(FromDense, ToleranceIsHonoured) {
  std::mt19937_64 rng(2);
  // Decaying spectrum so truncation actually happens.
  auto base = random_tt({6, 7, 5, 6}, 5, rng);
  auto d = tt::to_dense(base);
  auto noise = random_dense(d.shape(), rng);
  for (std::size_t i = 0; i < d.size(); ++i) d.values()[i] += 1e-6 * noise.values()[i];
  for (double eps : {1e-4, 1e-8, 1e-12}) {
    auto t = tt::from_dense(d, eps);
    EXPECT_LE(relative_error(tt::to_dense(t), d), eps) << "eps=" << eps;
  }
  EXPECT_LE(tt::from_dense(d, 1e-4).max_rank(), 5u);
}

TEST(FromDense, RejectsNonFinite) {
  DenseTensor d({2, 2}, 1.0);
  d.values()[3] = std::nan("");
  EXPECT_THROW(tt::from_dense(d, 1e-8), InvalidArgument);
  EXPECT_THROW(tt::from_dense(DenseTensor({2, 2}, 1.0), 0.0), InvalidArgument);
}

TEST(ToDense, SingleAxis) {
  TTCore c(1, 3, 1);
  c.data = {1, 2, 3};
  auto d = tt::to_dense(TTTensor({c}));
  EXPECT_EQ(d.values(), (std::vector<double>{1, 2, 3}));
}

TEST(ToDense, GuardRefusesHugeTensors) {
  auto t = tt::constant(Shape(8, 64), 1.0);
  try {
    tt::to_dense(t);
    FAIL() << "expected GuardExceeded";
  } catch (const GuardExceeded& e) {
    EXPECT_DOUBLE_EQ(e.required(), std::pow(64.0, 8));
  }
}

TEST(Eval, MatchesDenseEverywhere) {
  std::mt19937_64 rng(3);
  auto t = random_tt({6, 6, 6}, 3, rng);
  auto d = tt::to_dense(t);
  for (std::size_t lin = 0; lin < d.size(); ++lin) {
    auto idx = d.multi_index(lin);
    const double ref = d.values()[lin];
    EXPECT_NEAR(tt::eval(t, idx), ref, 1e-12 * std::max(1.0, std::abs(ref)));
  }
  EXPECT_DOUBLE_EQ(tt::eval(tt::constant({3, 4}, 7.0), {2, 1}), 7.0);
}

TEST(Eval, RankOneProduct) {
  DenseTensor d = DenseTensor::generate({2, 2}, [](auto idx) {
    const double a[] = {1, 2}, b[] = {3, 4};
    return a[idx[0]] * b[idx[1]];
  });
  EXPECT_NEAR(tt::eval(tt::from_dense(d, 1e-12), {1, 0}), 6.0, 1e-12);
}

TEST(Eval, OutOfRange) {
  auto t = tt::constant({3, 3}, 1.0);
  EXPECT_THROW(tt::eval(t, {3, 0}), InvalidArgument);
  EXPECT_THROW(tt::eval(t, {0}), InvalidArgument);
}

TEST(Axpy, CancelsAndAdds) {
  std::mt19937_64 rng(4);
  auto x = random_tt({4, 5, 6}, 3, rng);
  EXPECT_LE(tt::norm(tt::axpy(-1.0, x, x)), 1e-12 * tt::norm(x));
  auto seven = tt::axpy(1.0, tt::constant({3, 3}, 3.0), tt::constant({3, 3}, 4.0));
  const auto dseven = tt::to_dense(seven);
  for (double v : dseven.values()) EXPECT_NEAR(v, 7.0, 1e-14);
}

TEST(Axpy, MatchesDense) {
  std::mt19937_64 rng(5);
  auto x = random_tt({4, 5, 6, 3}, 3, rng);
  auto y = random_tt({4, 5, 6, 3}, 2, rng);
  auto dx = tt::to_dense(x), dy = tt::to_dense(y);
  DenseTensor ref(dx.shape());
  for (std::size_t i = 0; i < ref.size(); ++i) ref.values()[i] = -2.5 * dx.values()[i] + dy.values()[i];
  EXPECT_LE(relative_error(tt::to_dense(tt::axpy(-2.5, x, y)), ref), 1e-12);
  EXPECT_THROW(tt::axpy(1.0, x, tt::constant({4, 5, 6}, 1.0)), InvalidArgument);
}

TEST(Round, KeepsMinimalRanksAndCollapsesDuplicates) {
  std::mt19937_64 rng(6);
  auto t = tt::round(random_tt({5, 6, 7, 4}, 3, rng), 1e-12);
  EXPECT_EQ(tt::round(t, 1e-12).ranks(), t.ranks());
  auto doubled = tt::round(tt::axpy(1.0, t, t), 1e-12);
  EXPECT_EQ(doubled.ranks(), t.ranks());
}

TEST(Round, ErrorBound) {
  std::mt19937_64 rng(7);
  auto a = random_tt({6, 6, 6, 6}, 4, rng);
  auto b = random_tt({6, 6, 6, 6}, 4, rng);
  auto t = tt::axpy(1e-6, b, a);
  auto d = tt::to_dense(t);
  for (double eps : {1e-4, 1e-8}) {
    auto r = tt::round(t, eps);
    EXPECT_LE(relative_error(tt::to_dense(r), d), eps);
    auto rr = r.ranks(), tr = t.ranks();
    for (std::size_t k = 0; k < rr.size(); ++k) EXPECT_LE(rr[k], tr[k]);
  }
}

TEST(Dot, NormalizedInnerProduct) {
  EXPECT_DOUBLE_EQ(tt::dot(tt::constant({3, 5, 2}, 1.0), tt::constant({3, 5, 2}, 1.0)), 1.0);
  EXPECT_NEAR(tt::dot(tt::constant({4, 4}, -3.0), tt::constant({4, 4}, -3.0)), 9.0, 1e-14);
  std::mt19937_64 rng(8);
  auto a = random_tt({6, 6, 6}, 3, rng), b = random_tt({6, 6, 6}, 2, rng);
  auto da = tt::to_dense(a), db = tt::to_dense(b);
  double ref = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) ref += da.values()[i] * db.values()[i];
  ref /= static_cast<double>(da.size());
  EXPECT_NEAR(tt::dot(a, b), ref, 1e-12 * std::abs(ref));
}

TEST(Dot, Linearity) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_tt({4, 3, 5}, 2, rng), y = random_tt({4, 3, 5}, 3, rng),
         z = random_tt({4, 3, 5}, 2, rng);
    const double a = std::uniform_real_distribution<double>(-3, 3)(rng);
    const double lhs = tt::dot(tt::axpy(a, x, y), z);
    const double rhs = a * tt::dot(x, z) + tt::dot(y, z);
    const double scale = std::abs(a * tt::dot(x, z)) + std::abs(tt::dot(y, z));
    EXPECT_NEAR(lhs, rhs, 1e-10 * scale);
  }
}

TEST(MeanAxes, Basics) {
  auto c = tt::mean_axes(tt::constant({3, 4, 5}, 2.5), {0, 2});
  EXPECT_EQ(c.shape(), (Shape{4}));
  const auto dc = tt::to_dense(c);
  for (double v : dc.values()) EXPECT_NEAR(v, 2.5, 1e-14);

  auto ij = tt::from_dense(DenseTensor::generate({3, 5}, [](auto idx) { return double(idx[0]); }),
                           1e-12);
  auto m = tt::to_dense(tt::mean_axes(ij, {1}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(m.values()[i], double(i), 1e-13);

  auto all = tt::mean_axes(tt::constant({2, 2}, 4.0), {0, 1});
  EXPECT_TRUE(all.is_scalar());
  EXPECT_NEAR(all.scalar_value(), 4.0, 1e-14);
  EXPECT_THROW(tt::mean_axes(ij, {}), InvalidArgument);
  EXPECT_THROW(tt::mean_axes(ij, {2}), InvalidArgument);
}

TEST(MeanAxes, MatchesDenseAndComposes) {
  std::mt19937_64 rng(10);
  auto t = random_tt({6, 6, 6}, 3, rng);
  auto d = tt::to_dense(t);
  auto ref = dense_mean(d, {1, 2});
  EXPECT_LE(relative_error(tt::to_dense(tt::mean_axes(t, {1, 2})), ref), 1e-12);

  auto t4 = random_tt({3, 4, 5, 6}, 3, rng);
  auto joint = tt::to_dense(tt::mean_axes(t4, {1, 3}));
  auto staged = tt::to_dense(tt::mean_axes(tt::mean_axes(t4, {3}), {1}));
  EXPECT_LE(relative_error(staged, joint), 1e-12);
}

TEST(Broadcast, InverseOfMeanAndTiling) {
  std::mt19937_64 rng(11);
  auto t = random_tt({4, 5, 3}, 3, rng);
  for (std::size_t pos = 0; pos <= 3; ++pos) {
    auto b = tt::broadcast(t, pos, 6);
    auto back = tt::mean_axes(b, {pos});
    EXPECT_EQ(tt::to_dense(back).values(), tt::to_dense(t).values()) << "pos=" << pos;
    auto db = tt::to_dense(b);
    auto dt = tt::to_dense(t);
    for (std::size_t lin = 0; lin < db.size(); ++lin) {
      auto idx = db.multi_index(lin);
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(pos));
      EXPECT_DOUBLE_EQ(db.values()[lin], dt(idx));
    }
  }
  auto m = tt::broadcast(tt::broadcast(TTTensor::scalar(3.0), 0, 4), 0, 4);
  auto dm = tt::to_dense(m);
  EXPECT_EQ(dm.shape(), (Shape{4, 4}));
  for (double v : dm.values()) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(FixAxis, SlicesMatchDense) {
  auto t = tt::from_dense(
      DenseTensor::generate({4, 4}, [](auto idx) { return 10.0 * idx[0] + idx[1]; }), 1e-12);
  auto s = tt::to_dense(tt::fix_axis(t, 0, 2));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(s.values()[j], 20.0 + j, 1e-12);
  auto cs = tt::to_dense(tt::fix_axis(tt::constant({3, 4, 5}, -1.0), 1, 3));
  for (double v : cs.values()) EXPECT_DOUBLE_EQ(v, -1.0);

  std::mt19937_64 rng(12);
  auto r = random_tt({6, 6, 6}, 3, rng);
  auto d = tt::to_dense(r);
  for (std::size_t ax = 0; ax < 3; ++ax)
    for (std::size_t i = 0; i < 6; ++i)
      EXPECT_LE(max_abs_diff(tt::to_dense(tt::fix_axis(r, ax, i)), ppx::testing::dense_slice(d, ax, i)),
                1e-12);
  EXPECT_THROW(tt::fix_axis(r, 3, 0), InvalidArgument);
  EXPECT_THROW(tt::fix_axis(r, 0, 6), InvalidArgument);
}

TEST(FixAxis, CommutesWithMean) {
  std::mt19937_64 rng(13);
  auto t = random_tt({4, 5, 6, 3}, 3, rng);
  // Fix axis 1 at 2, average original axis 3.
  auto a = tt::to_dense(tt::mean_axes(tt::fix_axis(t, 1, 2), {2}));
  auto b = tt::to_dense(tt::fix_axis(tt::mean_axes(t, {3}), 1, 2));
  EXPECT_LE(max_abs_diff(a, b), 1e-12 * ppx::testing::max_abs(a));
}

TEST(PermuteAxes, IdentityTransposeRandom) {
  std::mt19937_64 rng(14);
  auto t = random_tt({5, 6, 7}, 3, rng);
  auto same = tt::permute_axes(t, {0, 1, 2}, 1e-10);
  EXPECT_EQ(tt::to_dense(same).values(), tt::to_dense(t).values());

  auto r1 = tt::from_dense(DenseTensor::generate({3, 5}, [](auto idx) {
                             return (idx[0] + 1.0) * (2.0 * idx[1] - 3.0);
                           }),
                           1e-12);
  auto tr = tt::permute_axes(r1, {1, 0}, 1e-12);
  EXPECT_EQ(tr.ranks(), (std::vector<std::size_t>{1, 1, 1}));
  auto dtr = tt::to_dense(tr);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      EXPECT_NEAR(dtr({j, i}), (i + 1.0) * (2.0 * j - 3.0), 1e-12);

  auto p = tt::permute_axes(t, {2, 0, 1}, 1e-10);
  auto ref = ppx::testing::dense_permute(tt::to_dense(t), {2, 0, 1});
  EXPECT_EQ(p.shape(), (Shape{7, 5, 6}));
  EXPECT_LE(relative_error(tt::to_dense(p), ref), 1e-10);
}

TEST(PermuteAxes, LongerChains) {
  std::mt19937_64 rng(15);
  auto t = random_tt({3, 4, 5, 3, 4}, 3, rng);
  const std::vector<std::size_t> order{3, 0, 4, 2, 1};
  auto p = tt::permute_axes(t, order, 1e-12);
  auto ref = ppx::testing::dense_permute(tt::to_dense(t), order);
  EXPECT_LE(relative_error(tt::to_dense(p), ref), 1e-12);
  EXPECT_THROW(tt::permute_axes(t, {0, 0, 1, 2, 3}, 1e-12), InvalidArgument);
}

TEST(PermuteAxes, MixedRanksWithTruncation) {
  // Rank-one bonds next to wider ones produce rank-deficient supercores.
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> bins(4, 8), rank(1, 4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Shape shape(6);
    for (auto& s : shape) s = bins(rng);
    std::vector<TTCore> cores;
    std::size_t left = 1;
    for (std::size_t k = 0; k < 6; ++k) {
      const std::size_t right = k == 5 ? 1 : rank(rng);
      TTCore c(left, shape[k], right);
      for (auto& v : c.data) v = g(rng);
      cores.push_back(std::move(c));
      left = right;
    }
    const TTTensor t(std::move(cores));
    const auto d = tt::to_dense(t);
    std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
    std::shuffle(order.begin(), order.end(), rng);
    const auto p = tt::permute_axes(t, order, 1e-12);
    EXPECT_LE(max_abs_diff(tt::to_dense(p), ppx::testing::dense_permute(d, order)),
              1e-10 * ppx::testing::max_abs(d))
        << "trial " << trial;
  }
}

TEST(Svd, ReconstructsRankDeficientMatrices) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index m = 2 + Eigen::Index(rng() % 30), n = 2 + Eigen::Index(rng() % 30);
    const Eigen::Index r = 1 + Eigen::Index(rng() % std::size_t(std::min(m, n)));
    Matrix a = Matrix::NullaryExpr(m, r, [&] { return g(rng); }) * Matrix::NullaryExpr(r, n, [&] { return g(rng); });
    const auto dec = tt::detail::svd(a);
    const Matrix back = dec.u * dec.s.asDiagonal() * dec.v.transpose();
    EXPECT_LE((back - a).norm(), 1e-12 * a.norm()) << m << "x" << n << " rank " << r;
  }
}

TEST(InterfaceFactor, RowGramMatchesUnfolding) {
  std::mt19937_64 rng(16);
  auto t = random_tt({5, 5, 5}, 4, rng);
  auto d = tt::to_dense(t);
  auto f = tt::interface_factor(t, 1);
  for (std::size_t i = 0; i < 5; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 25; ++j) row += d.values()[i * 25 + j] * d.values()[i * 25 + j];
    EXPECT_NEAR(f.p.row(Eigen::Index(i)).squaredNorm(), row, 1e-10 * row);
  }

  auto t5 = random_tt({4, 3, 4, 3, 4}, 3, rng);
  auto d5 = tt::to_dense(t5);
  for (std::size_t k = 1; k < 5; ++k) {
    auto g = tt::interface_factor(t5, k);
    const std::size_t rows = static_cast<std::size_t>(g.p.rows());
    const std::size_t cols = d5.size() / rows;
    Matrix gram = g.p * g.p.transpose() / static_cast<double>(cols);
    Eigen::Map<const RowMatrix> m(d5.values().data(), Eigen::Index(rows), Eigen::Index(cols));
    Matrix ref = m * m.transpose() / static_cast<double>(cols);
    EXPECT_LE((gram - ref).cwiseAbs().maxCoeff(), 1e-10 * ref.cwiseAbs().maxCoeff()) << "K=" << k;
  }
}

TEST(InterfaceFactor, RankOneAndConstant) {
  auto r1 = tt::from_dense(
      DenseTensor::generate({3, 4, 2}, [](auto idx) { return (1.0 + idx[0]) * (idx[1] - 1.5) * (idx[2] + 2.0); }),
      1e-12);
  EXPECT_EQ(tt::interface_factor(r1, 1).p.cols(), 1);
  auto c = tt::interface_factor(tt::constant({4, 3, 3}, 2.0), 1);
  for (Eigen::Index i = 1; i < c.p.rows(); ++i) EXPECT_NEAR((c.p.row(i) - c.p.row(0)).norm(), 0.0, 1e-14);
  EXPECT_THROW(tt::interface_factor(r1, 3), InvalidArgument);
  EXPECT_THROW(tt::interface_factor(r1, 0), InvalidArgument);
}
