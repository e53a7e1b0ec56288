#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_support.hpp"

using namespace fedsysid;
using fedsysid::testing::hstack;
using fedsysid::testing::nominal_clients;
using fedsysid::testing::nominal_system;
using fedsysid::testing::random_matrix;
using fedsysid::testing::rel_diff;

TEST(ThetaEstimate, PartitionsColumns) {
  Matrix t(2, 3);
  t << 1, 2, 3, 4, 5, 6;
  const ThetaEstimate e(t, 2);
  EXPECT_EQ(e.A_hat(), t.leftCols(2));
  EXPECT_EQ(e.B_hat(), t.rightCols(1));
  EXPECT_EQ(e.p(), 1);
  EXPECT_THROW(ThetaEstimate(t, 3), InvalidArgument);
}

TEST(LsEstimate, IdentityDesign) {
  Rng rng(1);
  const Matrix X = random_matrix(rng, 3, 5);
  const ThetaEstimate e = ls_estimate(X, Matrix::Identity(5, 5));
  EXPECT_LE((e.theta() - X).norm(), 1e-14);
}

TEST(LsEstimate, NoiselessRecovery) {
  const LtiSystem s = nominal_system();
  const ClientDataset d = simulate_client_dataset(s, NoiseSpec{1.0, 1.0, 0.0}, 10, 5, Rng(2));
  EXPECT_EQ(d.W.norm(), 0.0);
  const ThetaEstimate e = ls_estimate(d.X, d.Z);
  EXPECT_LE((e.theta() - s.theta()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LsEstimate, MatchesPseudoinverseOracle) {
  const ClientDataset d = simulate_client_dataset(nominal_system(), NoiseSpec{}, 25, 5, Rng(3));
  ASSERT_EQ(d.Z.cols(), 125);
  const Matrix oracle = d.X * d.Z.completeOrthogonalDecomposition().pseudoInverse();
  EXPECT_LE((ls_estimate(d.X, d.Z).theta() - oracle).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LsEstimate, RejectsBadInput) {
  EXPECT_THROW(ls_estimate(Matrix::Zero(3, 4), Matrix::Zero(5, 4)), InvalidArgument);
  EXPECT_THROW(ls_estimate(Matrix::Zero(3, 6), Matrix::Zero(5, 7)), InvalidArgument);
  EXPECT_THROW(ls_estimate(Matrix::Zero(3, 6), Matrix::Zero(3, 6)), InvalidArgument);
}

TEST(LsEstimate, SingularDataNamesLambdaMin) {
  Rng rng(4);
  Matrix Z = random_matrix(rng, 5, 50);
  Z.row(4) = Z.row(0) + Z.row(1);
  const Matrix X = random_matrix(rng, 3, 50);
  try {
    (void)ls_estimate(X, Z);
    FAIL() << "expected SingularDataError";
  } catch (const SingularDataError& e) {
    EXPECT_LT(e.lambda_min(), 1e-10 * e.lambda_max());
    EXPECT_NE(std::string(e.what()).find("lambda_min"), std::string::npos);
  }
}

TEST(LsEstimate, PermutationInvariance) {
  const ClientDataset d = simulate_client_dataset(nominal_system(), NoiseSpec{}, 25, 5, Rng(5));
  std::vector<int> perm(static_cast<std::size_t>(d.Z.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  Eigen::PermutationMatrix<Eigen::Dynamic> P(static_cast<int>(perm.size()));
  P.indices() = Eigen::Map<Eigen::VectorXi>(perm.data(), static_cast<int>(perm.size()));
  const Matrix a = ls_estimate(d.X, d.Z).theta();
  const Matrix b = ls_estimate(d.X * P, d.Z * P).theta();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LsEstimate, Optimality) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ClientDataset d = simulate_client_dataset(nominal_system(), NoiseSpec{}, 25, 5, Rng(100 + seed));
    const Matrix theta = ls_estimate(d.X, d.Z).theta();
    const Matrix grad = (d.X - theta * d.Z) * d.Z.transpose();
    EXPECT_LE(grad.norm(), 1e-8 * d.X.norm() * d.Z.norm());
  }
}

TEST(PooledLs, SingleClientEqualsLocal) {
  const auto data = nominal_clients(1, 25, 6);
  EXPECT_LE(rel_diff(pooled_ls(data).theta(), ls_estimate(data[0].X, data[0].Z).theta()), 1e-12);
}

TEST(PooledLs, DuplicatedDatasets) {
  const auto one = nominal_clients(1, 25, 7);
  const std::vector<ClientDataset> three(3, one[0]);
  EXPECT_LE(rel_diff(pooled_ls(three).theta(), ls_estimate(one[0].X, one[0].Z).theta()), 1e-12);
}

TEST(PooledLs, EqualsStackedEstimate) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<ClientDataset> data;
    const auto ens = experiments::make_ensemble(experiments::defaults::nominal_a(), experiments::defaults::nominal_b(),
                                                experiments::defaults::pattern_v(), experiments::defaults::pattern_u(),
                                                0.5, 3, Rng(seed));
    for (std::size_t i = 0; i < 3; ++i) {
      data.push_back(simulate_client_dataset(ens.systems[i], NoiseSpec{}, 5 + 7 * i, 5, Rng(seed).fork(i), i));
    }
    std::vector<Matrix> xs, zs;
    for (const auto& d : data) {
      xs.push_back(d.X);
      zs.push_back(d.Z);
    }
    const Matrix stacked = ls_estimate(hstack(xs), hstack(zs)).theta();
    EXPECT_LE(rel_diff(pooled_ls(data).theta(), stacked), 1e-10);
  }
}

TEST(PooledLs, Errors) {
  EXPECT_THROW(pooled_ls(std::vector<ClientDataset>{}), InvalidArgument);
  auto tiny = nominal_clients(2, 1, 8);
  tiny[0].X = tiny[0].X.leftCols(1);
  tiny[0].Z = tiny[0].Z.leftCols(1);
  tiny[1].X = tiny[1].X.leftCols(1);
  tiny[1].Z = tiny[1].Z.leftCols(1);
  EXPECT_THROW(pooled_ls(tiny), InvalidArgument);
}

TEST(AvgOfLocalLs, SingleClient) {
  const auto data = nominal_clients(1, 25, 9);
  EXPECT_LE(rel_diff(avg_of_local_ls(data).theta(), ls_estimate(data[0].X, data[0].Z).theta()), 1e-12);
}

TEST(AvgOfLocalLs, EqualGramsMatchPooled) {
  // Same Z for every client, different X.
  const auto base = nominal_clients(1, 25, 10);
  Rng rng(11);
  std::vector<ClientDataset> data(3, base[0]);
  for (auto& d : data) d.X += 0.1 * random_matrix(rng, d.X.rows(), d.X.cols());
  EXPECT_LE(rel_diff(avg_of_local_ls(data).theta(), pooled_ls(data).theta()), 1e-12);
}

TEST(AvgOfLocalLs, DiffersFromPooledWithinPairwiseGap) {
  const Rng root(12);
  std::vector<ClientDataset> data;
  const LtiSystem s = nominal_system();
  data.push_back(simulate_client_dataset(s, NoiseSpec{}, 5, 5, root.fork(0), 0));
  data.push_back(simulate_client_dataset(s, NoiseSpec{}, 40, 5, root.fork(1), 1));
  const Matrix avg = avg_of_local_ls(data).theta();
  const Matrix pooled = pooled_ls(data).theta();
  const Matrix l0 = ls_estimate(data[0].X, data[0].Z).theta();
  const Matrix l1 = ls_estimate(data[1].X, data[1].Z).theta();
  const double gap = spectral_norm(avg - pooled);
  EXPECT_GT(gap, 0.0);
  EXPECT_LE(gap, spectral_norm(l0 - l1));
}

TEST(AvgOfLocalLs, SingularClientIsNamed) {
  auto data = nominal_clients(3, 25, 13);
  data[2].Z.row(4) = data[2].Z.row(3);
  try {
    (void)avg_of_local_ls(data);
    FAIL() << "expected SingularDataError";
  } catch (const SingularDataError& e) {
    EXPECT_NE(std::string(e.what()).find("client 2"), std::string::npos);
  }
}

TEST(EstimationError, ExactEstimate) {
  const LtiSystem s = nominal_system();
  const EstimationError e = estimation_error(ThetaEstimate(s.theta(), 3), s);
  EXPECT_EQ(e.err_a, 0.0);
  EXPECT_EQ(e.err_b, 0.0);
  EXPECT_EQ(e.err_max, 0.0);
}

TEST(EstimationError, UnitNormPerturbation) {
  const LtiSystem s = nominal_system();
  Matrix theta = s.theta();
  theta.leftCols(3) += 0.1 * experiments::defaults::pattern_v();
  const EstimationError e = estimation_error(ThetaEstimate(theta, 3), s);
  EXPECT_NEAR(e.err_a, 0.1, 1e-14);
  EXPECT_NEAR(e.err_b, 0.0, 1e-14);
  EXPECT_NEAR(e.err_max, 0.1, 1e-14);
}

TEST(EstimationError, MatchesSvdOracle) {
  Rng rng(14);
  const LtiSystem s = nominal_system();
  for (int k = 0; k < 20; ++k) {
    const Matrix theta = s.theta() + random_matrix(rng, 3, 5, 0.3);
    const EstimationError e = estimation_error(ThetaEstimate(theta, 3), s);
    const double sa = Eigen::BDCSVD<Matrix>(theta.leftCols(3) - s.A()).singularValues()(0);
    const double sb = Eigen::BDCSVD<Matrix>(theta.rightCols(2) - s.B()).singularValues()(0);
    EXPECT_NEAR(e.err_max, std::max(sa, sb), 1e-10);
  }
}

TEST(EstimationError, DimensionMismatch) {
  const LtiSystem s = nominal_system();
  EXPECT_THROW(estimation_error(ThetaEstimate(Matrix::Zero(3, 4), 3), s), InvalidArgument);
}

TEST(CentralizedRecovery, ErrorScalesWithRolloutCount) {
  const LtiSystem s = nominal_system();
  std::vector<double> small, large;
  for (std::uint64_t k = 0; k < 200; ++k) {
    const Rng root = Rng(15).fork(k);
    const ClientDataset a = simulate_client_dataset(s, NoiseSpec{}, 25, 5, root.fork(0));
    const ClientDataset b = simulate_client_dataset(s, NoiseSpec{}, 100, 5, root.fork(1));
    small.push_back(estimation_error(ls_estimate(a.X, a.Z), s).err_max);
    large.push_back(estimation_error(ls_estimate(b.X, b.Z), s).err_max);
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  const double ratio = median(small) / median(large);
  EXPECT_GE(ratio, 1.6);
  EXPECT_LE(ratio, 2.6);
}
