#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "noether/conservation.hpp"
#include "noether/symmetry.hpp"

using namespace noether;
using testing_util::Mat;
using testing_util::Vec;

namespace {

struct Case {
  std::string name;
  Network<double> net;
  LossSpec<double> ls;
  std::vector<Generator<double>> gens;
};

Mat random_skew(Index d, std::mt19937_64& rng) {
  const Mat m = testing_util::random_matrix(d, d, rng);
  return m - m.transpose();
}

// One instance of every built-in symmetry on an architecture it applies to.
std::vector<Case> symmetric_cases(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Case> out;
  auto data = testing_util::random_regression(9, 3, 2, seed + 1);
  const auto quad = LossSpec<double>::quadratic(data);
  for (const auto& act : {Activation::relu(), Activation::leaky_relu(0.2), Activation::repu(2.0),
                          Activation::polynomial(3), Activation::linear(0.7)})
    for (bool bias : {false, true}) {
      auto net = testing_util::random_net(Architecture::mlp({3, 4, 4, 2}, act, Activation::linear(), bias), seed);
      out.push_back({act.to_string(), net, quad, neuron_generators(net)});
    }
  for (bool bias : {false, true}) {
    auto net = testing_util::random_net(
        Architecture::mlp({3, 4, 2}, Activation::swish(), Activation::linear(), bias), seed);
    out.push_back({"swish", net, quad, neuron_generators(net)});
  }
  {
    auto net = testing_util::random_net(Architecture::mlp({3, 4, 3, 2}, Activation::linear()), seed);
    out.push_back({"linear_layers", net, quad,
                   {LinearLayer<double>{1, testing_util::random_matrix(4, 4, rng)},
                    LinearLayer<double>{2, testing_util::random_matrix(3, 3, rng)}}});
  }
  {
    Network<double> net(Architecture::mlp({3, 1}, Activation::linear()));
    net.assign(testing_util::random_vector(3, rng));
    out.push_back({"rotation_radial", net,
                   LossSpec<double>::from_potential(Potential<double>::radial_quartic()),
                   {Rotation<double>{random_skew(3, rng)}}});
  }
  {
    auto net = testing_util::random_net(Architecture::mlp({3, 4, 2}, Activation::linear()), seed);
    out.push_back({"rotation_cross_polytope", net,
                   LossSpec<double>::quadratic(cross_polytope<double>(3, Vec{{0.5, -1.0}})),
                   {Rotation<double>{random_skew(3, rng)}}});
  }
  return out;
}

}  // namespace

TEST(ApplyGenerator, HomogeneityOnScalarChain) {
  Network<double> net(Architecture::mlp({1, 1, 1}, Activation::relu()));
  net.assign(Vec{{0.8, -1.7}});
  EXPECT_EQ(apply_generator<double>(Homogeneity{1, 0, 1.0}, net), (Vec{{0.8, 1.7}}));
}

TEST(ApplyGenerator, ZeroLinearGeneratorGivesZeroTangent) {
  auto net = testing_util::random_net(Architecture::mlp({2, 3, 2}, Activation::linear()), 1);
  const Vec xi = apply_generator<double>(LinearLayer<double>{1, Mat::Zero(3, 3)}, net);
  EXPECT_EQ(xi.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ApplyGenerator, PlanarRotationField) {
  Network<double> net(Architecture::mlp({2, 1}, Activation::linear()));
  const double x1 = 0.6, x2 = -1.4, theta = 0.3;
  net.assign(Vec{{x1, x2}});
  Mat P(2, 2);
  P << 0, theta, -theta, 0;
  const Vec xi = apply_generator<double>(Rotation<double>{P}, net);
  EXPECT_DOUBLE_EQ(xi(0), -theta * x2);
  EXPECT_DOUBLE_EQ(xi(1), theta * x1);
}

TEST(ApplyGenerator, SlotsOfNeuronGenerators) {
  auto net = testing_util::random_net(
      Architecture::mlp({2, 3, 2}, Activation::swish(), Activation::linear(), true), 4);
  const Vec xi = apply_generator<double>(SwishNeuron{1, 2, true}, net);
  Vec want = Vec::Zero(net.param_count());
  const auto s1 = net.slots(1), s2 = net.slots(2);
  for (Index j = 0; j < 2; ++j) want(s1.weight + j * 3 + 2) = net.weight(1)(2, j);
  want(s1.bias + 2) = net.bias(1)(2);
  want(s1.beta + 2) = -net.beta(1)(2);
  for (Index r = 0; r < 2; ++r) want(s2.weight + 2 * 2 + r) = -net.weight(2)(r, 2);
  EXPECT_EQ(xi, want);
}

TEST(ApplyGenerator, IsLinearInParameters) {
  std::mt19937_64 rng(3);
  for (const auto& c : symmetric_cases(5))
    for (const auto& g : c.gens) {
      const Vec a = testing_util::random_vector(c.net.param_count(), rng);
      const Vec b = testing_util::random_vector(c.net.param_count(), rng);
      const Vec sum = apply_generator(g, c.net.with_params(a + b));
      const Vec parts = apply_generator(g, c.net.with_params(a)) + apply_generator(g, c.net.with_params(b));
      EXPECT_LE((sum - parts).cwiseAbs().maxCoeff(), 1e-12 * (1 + parts.norm())) << c.name;
    }
}

TEST(ApplyGenerator, MismatchesRaise) {
  auto relu = testing_util::random_net(Architecture::mlp({2, 3, 2}, Activation::relu()), 1);
  EXPECT_THROW(apply_generator<double>(Homogeneity{1, 0, 2.0}, relu), GeneratorError);
  EXPECT_THROW(apply_generator<double>(Homogeneity{2, 0, 1.0}, relu), GeneratorError);
  EXPECT_THROW(apply_generator<double>(Homogeneity{1, 3, 1.0}, relu), GeneratorError);
  EXPECT_THROW(apply_generator<double>(Homogeneity{1, 0, 1.0, true}, relu), GeneratorError);
  EXPECT_THROW(apply_generator<double>(SwishNeuron{1, 0}, relu), GeneratorError);
  EXPECT_THROW(apply_generator<double>(LinearLayer<double>{1, Mat::Identity(3, 3)}, relu), GeneratorError);
  Mat notskew = Mat::Identity(2, 2);
  EXPECT_THROW(apply_generator<double>(Rotation<double>{notskew}, relu), GeneratorError);
  auto swish = testing_util::random_net(Architecture::mlp({2, 3, 2}, Activation::swish()), 1);
  EXPECT_THROW(apply_generator<double>(Homogeneity{1, 0, 1.0}, swish), GeneratorError);
}

TEST(TransformExact, ZeroIsIdentity) {
  for (const auto& c : symmetric_cases(2))
    for (const auto& g : c.gens)
      EXPECT_LE((transform_exact(g, c.net, 0.0).flatten() - c.net.flatten()).cwiseAbs().maxCoeff(),
                1e-15) << c.name;
}

TEST(TransformExact, ReluRescalingKeepsOutputs) {
  auto net = testing_util::random_net(Architecture::mlp({3, 5, 2}, Activation::relu()), 8);
  const auto t = transform_exact<double>(Homogeneity{1, 2, 1.0}, net, 1.0);
  EXPECT_EQ(t.weight(1).row(2), Eigen::RowVectorXd(2.0 * net.weight(1).row(2)));
  EXPECT_EQ(t.weight(2).col(2), Vec(0.5 * net.weight(2).col(2)));
  std::mt19937_64 rng(1);
  for (int s = 0; s < 10; ++s) {
    const Vec x = testing_util::random_vector(3, rng);
    EXPECT_LE((t(x) - net(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TransformExact, DerivativeAtZeroIsGenerator) {
  // Richardson: D(e) = (T(e) - T(0)) / e = xi + O(e); 2 D(e/2) - D(e) = xi + O(e^2).
  for (const auto& c : symmetric_cases(6))
    for (const auto& g : c.gens) {
      const Vec w = c.net.flatten();
      const Vec xi = apply_generator(g, c.net);
      auto D = [&](double e) { return Vec((transform_exact(g, c.net, e).flatten() - w) / e); };
      const double e1 = 1e-2, e2 = 5e-3;
      const double plain = (D(e1) - xi).norm();
      const double extrapolated = (2.0 * D(e1 / 2) - D(e1) - xi).norm();
      const double extrapolated2 = (2.0 * D(e2 / 2) - D(e2) - xi).norm();
      const double scale = 1.0 + xi.norm();
      EXPECT_LE(plain, 1e-1 * scale) << c.name;
      EXPECT_LE(extrapolated, 1e-3 * scale) << c.name << " " << describe(g);
      // Halving e quarters the extrapolated error (unless already at roundoff).
      if (extrapolated > 1e-9 * scale) EXPECT_LE(extrapolated2, 0.35 * extrapolated) << c.name;
    }
}

TEST(TransformExact, CayleyIsExactRotation) {
  std::mt19937_64 rng(4);
  for (Index d : {2, 3, 5}) {
    const Mat P = random_skew(d, rng);
    const Mat Q = cayley<double>(0.7 * P);
    EXPECT_LE((Q.transpose() * Q - Mat::Identity(d, d)).norm(), 1e-12);
    EXPECT_NEAR(Q.determinant(), 1.0, 1e-10);
  }
}

TEST(TransformExact, SingularLinearElementRaises) {
  auto net = testing_util::random_net(Architecture::mlp({2, 2, 1}, Activation::linear()), 1);
  EXPECT_THROW(transform_exact<double>(LinearLayer<double>{1, -Mat::Identity(2, 2)}, net, 1.0), TransformError);
  auto relu = testing_util::random_net(Architecture::mlp({2, 2, 1}, Activation::relu()), 1);
  EXPECT_THROW(transform_exact<double>(Homogeneity{1, 0, 1.0}, relu, -1.0), TransformError);
}

TEST(LossInvariance, BuiltInSymmetriesLeaveLossUnchanged) {
  for (const auto& c : symmetric_cases(9)) {
    const double l = std::abs(loss(c.net, c.ls));
    for (const auto& g : c.gens)
      for (double eps : {1e-3, 0.1, 0.5})
        EXPECT_LE(loss_invariance_defect(g, c.net, c.ls, eps), 1e-10 * (1 + l))
            << c.name << " " << describe(g) << " eps=" << eps;
  }
}

TEST(LossInvariance, RotationOnGenericDataIsNotASymmetry) {
  std::mt19937_64 rng(12);
  auto net = testing_util::random_net(Architecture::mlp({3, 4, 1}, Activation::relu()), 3);
  const auto ls = LossSpec<double>::quadratic(testing_util::random_regression(15, 3, 1, 4));
  const Generator<double> g = Rotation<double>{random_skew(3, rng)};
  EXPECT_GT(loss_invariance_defect(g, net, ls, 0.37), 1e-6);
  const auto rt = rund_trautmann_check(g, net, ls);
  EXPECT_FALSE(rt.certified());
}

TEST(RundTrautmann, CertifiesBuiltInSymmetries) {
  for (const auto& c : symmetric_cases(17))
    for (const auto& g : c.gens) {
      const auto r = rund_trautmann_check(g, c.net, c.ls);
      EXPECT_TRUE(r.certified()) << c.name << " " << describe(g) << " residual " << r.residual;
    }
}

TEST(RundTrautmann, ZeroAtStationaryPoint) {
  Network<double> net(Architecture::mlp({3, 1}, Activation::linear()));
  net.assign(Vec{{1.0, 0.0, 0.0}});
  const auto ls = LossSpec<double>::from_potential(Potential<double>::radial_quartic());
  Mat P = Mat::Zero(3, 3);
  P(0, 1) = 1;
  P(1, 0) = -1;
  EXPECT_EQ(rund_trautmann_residual<double>(Rotation<double>{P}, net, ls), 0.0);
}

TEST(SkewBasis, SpansSoD) {
  const auto basis = skew_basis<double>(4);
  ASSERT_EQ(basis.size(), 6u);
  for (const auto& P : basis) EXPECT_EQ((P + P.transpose()).norm(), 0.0);
}

// Windows built by hand so the identities are checked on arbitrary data.
class WindowTest : public ::testing::Test {
 protected:
  Trajectory<double> make(const Network<double>& net, bool second_order, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Trajectory<double> traj;
    traj.dt = 0.01;
    for (int s = 0; s < 3; ++s) {
      Snapshot<double> snap;
      snap.step = s;
      snap.t = 0.5 + s * traj.dt;
      snap.w = testing_util::random_vector(net.param_count(), rng);
      if (second_order) snap.v = testing_util::random_vector(net.param_count(), rng);
      traj.snapshots.push_back(snap);
      traj.records.push_back({});
    }
    return traj;
  }
};

TEST_F(WindowTest, GradientFlowReducesToGradientPairing) {
  auto net = testing_util::random_net(Architecture::mlp({3, 5, 2}, Activation::relu()), 2);
  const auto ls = LossSpec<double>::quadratic(testing_util::random_regression(8, 3, 2, 3));
  const double eta = 1e-4;
  const auto spec = DynamicsSpec<double>::gradient_flow(eta, 2);
  const auto traj = run(spec, net, ls, {});
  const Generator<double> g = Homogeneity{1, 1, 1.0};
  const double ce = conserved_expression(g, net, window_at(traj, 1), spec);
  const Network<double> mid = net.with_params(traj.snapshots[1].w);
  const double direct = -grad(mid, ls).dot(apply_generator(g, mid));
  const double scale = grad(mid, ls).norm() * apply_generator(g, mid).norm();
  EXPECT_LE(std::abs(ce - direct), 1e-2 * scale);
  EXPECT_LE(std::abs(direct), 1e-8 * scale);
  // ODE substitution gives the pairing exactly.
  const Objective<double> obj(net, ls);
  const auto o = make_oracle(obj);
  EXPECT_DOUBLE_EQ(conserved_expression(g, net, window_at(traj, 1), spec, ForceEstimate::OdeRhs, &o), direct);
}

TEST_F(WindowTest, LinearTraceFormMatchesBalanceResidual) {
  auto net = testing_util::random_net(Architecture::mlp({3, 4, 3, 2}, Activation::linear()), 5);
  const auto spec = DynamicsSpec<double>::nesterov_flow(1e-4, 0);
  const auto traj = make(net, true, 6);
  const auto win = window_at(traj, 1);
  std::mt19937_64 rng(7);
  for (Index h : {1, 2}) {
    const Mat R = dynamic_balance_residual(net, win, h, spec);
    for (int k = 0; k < 100; ++k) {
      const Mat A = testing_util::random_matrix(net.width(h), net.width(h), rng);
      const double ce = conserved_expression<double>(LinearLayer<double>{h, A}, net, win, spec);
      EXPECT_LE(std::abs((R * A).trace() - ce), 1e-12 * (1 + std::abs(ce)));
    }
  }
}

TEST_F(WindowTest, RotationBasisRecoversAntisymmetricResidual) {
  auto net = testing_util::random_net(Architecture::mlp({4, 3, 1}, Activation::relu()), 5);
  for (bool second : {false, true}) {
    const auto spec = second ? DynamicsSpec<double>::newtonian(1e-4, 0)
                             : DynamicsSpec<double>::gradient_flow(1e-4, 0);
    const auto traj = make(net, second, 9);
    const auto win = window_at(traj, 1);
    const Mat R = rotation_residual(net, win, spec);
    EXPECT_LE((R + R.transpose()).norm(), 1e-15 * (1 + R.norm()));
    for (Index i = 0; i < 4; ++i)
      for (Index j = i + 1; j < 4; ++j) {
        Mat P = Mat::Zero(4, 4);
        P(i, j) = 1;
        P(j, i) = -1;
        const double ce = conserved_expression<double>(Rotation<double>{P}, net, win, spec);
        EXPECT_LE(std::abs(R(j, i) - ce), 1e-12 * (1 + std::abs(ce)));
      }
  }
}

TEST_F(WindowTest, ShortTrajectoryRejected) {
  Trajectory<double> traj;
  traj.snapshots.resize(2);
  EXPECT_THROW(window_at(traj, 1), InputError);
}
