#include <gtest/gtest.h>

#include <algorithm>

#include "subrad/dynamics.hpp"
#include "subrad/perturb.hpp"

using namespace subrad;

namespace {

SystemParams params(int n, double ratio) {
  return SystemParams::from_detuning_ratio(n, kTwoPi * 24e3, ratio, kTwoPi * kDefaultOmegaAOver2PiHz);
}

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

}  // namespace

TEST(Sector, MembersAndEnergy) {
  const SystemParams p = params(4, 30);
  const BasisPtr b = build_basis(4, 3);
  const DegenerateSector s = make_sector(p, *b, 2);
  ASSERT_EQ(s.members.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(s.members[static_cast<std::size_t>(i)], b->single_index(i, 1));
  EXPECT_EQ(s.intermediates.size(), b->block(2).size - 4);
  EXPECT_NEAR(s.unperturbed_energy / (2 * p.omega_c() - 2 * p.omega_a() - p.delta()), 1.0, 1e-15);
  EXPECT_THROW(make_sector(p, *b, 4), TruncationError);
  EXPECT_THROW(make_sector(p, *b, 0), PreconditionError);
}

TEST(FirstOrder, Vanishes) {
  for (int n = 2; n <= 6; ++n) {
    const SystemParams p = params(n, 30);
    const BasisPtr b = build_basis(n, 4);
    for (int ph = 1; ph <= 4; ++ph) EXPECT_LE(first_order_matrix(p, *b, make_sector(p, *b, ph)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(SecondOrder, SingleAtomDispersiveShift) {
  const SystemParams p = params(1, 30);
  const BasisPtr b = build_basis(1, 5);
  for (int n = 1; n <= 5; ++n) {
    const Eigen::MatrixXd m = second_order_matrix(p, *b, make_sector(p, *b, n));
    ASSERT_EQ(m.rows(), 1);
    const double expect = -p.g() * p.g() * n / p.delta();
    EXPECT_NEAR(m(0, 0) / expect, 1.0, 1e-12);
  }
}

TEST(SecondOrder, TwoAtomsOneExcitation) {
  const SystemParams p = params(2, 30);
  const BasisPtr b = build_basis(2, 1);
  const Eigen::VectorXd ev = sorted_eigenvalues(second_order_matrix(p, *b, make_sector(p, *b, 1)));
  const EffectiveModel em = closed_form_corrections(p, 1);
  // dE1 = -2 g^2/Delta, dE2 = 0
  EXPECT_NEAR(em.delta_e1, -2 * p.g() * p.g() / p.delta(), 1e-9);
  EXPECT_NEAR(*em.delta_ei, 0.0, 1e-9);
  EXPECT_NEAR(ev(0) / em.delta_e1, 1.0, 1e-10);
  EXPECT_NEAR(ev(1), *em.delta_ei, 1e-10 * std::abs(em.delta_e1));
}

TEST(SecondOrder, SpectrumMatchesClosedForm) {
  for (int N = 2; N <= 6; ++N)
    for (int n = 1; n <= 4; ++n) {
      const SystemParams p = params(N, 30);
      const BasisPtr b = build_basis(N, n);
      const Eigen::VectorXd ev = sorted_eigenvalues(second_order_matrix(p, *b, make_sector(p, *b, n)));
      const EffectiveModel em = closed_form_corrections(p, n);
      const double scale = p.g() * p.g() / p.delta();
      std::vector<double> expect(static_cast<std::size_t>(N - 1), *em.delta_ei);
      expect.push_back(em.delta_e1);
      std::sort(expect.begin(), expect.end());
      for (int i = 0; i < N; ++i) {
        const double e = expect[static_cast<std::size_t>(i)];
        EXPECT_LE(std::abs(ev(i) - e), 1e-10 * std::max(std::abs(e), scale)) << "N=" << N << " n=" << n << " i=" << i;
      }
      // the symmetric vector carries dE1
      const Eigen::MatrixXd m = second_order_matrix(p, *b, make_sector(p, *b, n));
      const Eigen::VectorXd sym = symmetric_atomic(N);
      EXPECT_LE((m * sym - em.delta_e1 * sym).norm(), 1e-10 * scale * N);
    }
}

TEST(ClosedForm, SplittingIsTwiceAlpha) {
  for (int N = 2; N <= 12; ++N)
    for (int n = 1; n <= 6; ++n) {
      const SystemParams p = params(N, 45);
      const EffectiveModel em = closed_form_corrections(p, n);
      EXPECT_NEAR((*em.delta_ei - em.delta_e1) / (N * p.g() * p.g() / p.delta()), 1.0, 1e-13);
      EXPECT_NEAR((*em.delta_ei - em.delta_e1) / (2 * em.alpha), 1.0, 1e-13);
    }
}

TEST(ClosedForm, AlphaIsIndependentOfN) {
  const SystemParams p = params(7, 30);
  const double a1 = closed_form_corrections(p, 1).alpha;
  for (int n = 2; n <= 10; ++n) EXPECT_EQ(closed_form_corrections(p, n).alpha, a1);
}

TEST(ClosedForm, SingleAtomHasNoSubradiantBranch) {
  const SystemParams p = params(1, 30);
  const EffectiveModel em = closed_form_corrections(p, 3);
  EXPECT_FALSE(em.delta_ei.has_value());
  EXPECT_NEAR(em.delta_e1, -p.g() * p.g() * 3 / p.delta(), 1e-9);
}

TEST(ClosedForm, ExperimentalRate) {
  const SystemParams p = params(10, 30);
  EXPECT_NEAR(closed_form_corrections(p, 1).alpha, 2.51e4, 0.02e4);
  EXPECT_NEAR(p.alpha(), 10 * std::pow(kTwoPi * 24e3, 2) / (2 * 30 * kTwoPi * 24e3), 1e-9);
}

TEST(ClosedForm, ResonantRejected) {
  const SystemParams p = SystemParams::from_frequencies(3, 5.0, 5.0, 0.1);
  EXPECT_THROW(closed_form_corrections(p, 1), PreconditionError);
  const BasisPtr b = build_basis(3, 1);
  EXPECT_THROW(second_order_matrix(p, *b, make_sector(p, *b, 1)), PreconditionError);
}

TEST(Effective, InitialStateAndNormalization) {
  for (int N : {2, 3, 10}) {
    const SystemParams p = params(N, 30);
    const EffectiveAmplitudes a0 = effective_evolve(p, 0.0);
    EXPECT_NEAR(std::abs(a0.control - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(a0.other), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(a0.symmetric - 1 / std::sqrt(static_cast<double>(N))), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(a0.subradiant - std::sqrt((N - 1.0) / N)), 0.0, 1e-15);
    for (int k = 0; k <= 50; ++k) {
      const EffectiveAmplitudes a = effective_evolve(p, k * 3e-6);
      EXPECT_NEAR(std::norm(a.control) + (N - 1) * std::norm(a.other), 1.0, 1e-14);
      EXPECT_NEAR(a.product_vector(N).norm(), 1.0, 1e-14);
    }
  }
}

TEST(Effective, TwoAtomTransfer) {
  const SystemParams p = params(2, 30);
  const EffectiveAmplitudes a = effective_evolve(p, 0.5 * std::numbers::pi / p.alpha());
  EXPECT_NEAR(std::abs(a.control), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(a.other), 1.0, 1e-15);
}

TEST(Effective, SymmetricSubradiantDecomposition) {
  // product vector = symmetric * |sym> + subradiant * |target>, up to a global phase
  const int N = 6;
  const SystemParams p = params(N, 30);
  const Eigen::VectorXcd sym = symmetric_atomic(N).cast<cplx>();
  const Eigen::VectorXcd tgt = subradiant_target_atomic(N).cast<cplx>();
  for (double t : {0.0, 1e-5, 4e-5}) {
    const EffectiveAmplitudes a = effective_evolve(p, t);
    const Eigen::VectorXcd v = a.product_vector(N);
    const Eigen::VectorXcd w = a.symmetric * sym + a.subradiant * tgt;
    EXPECT_NEAR(coefficient_error(v, w), 0.0, 1e-7);
  }
}

TEST(Validity, ParameterValues) {
  EXPECT_NEAR(validity_parameter(params(10, 30), 1.0), std::sqrt(20.0) / 30.0, 1e-15);
  EXPECT_NEAR(validity_parameter(params(10, 30), 1.0), 0.149, 5e-4);
  for (int N : {1, 2, 4})
    EXPECT_NEAR(validity_parameter(params(N, 50), 0.0), std::sqrt(static_cast<double>(N)) / 50.0, 1e-15);
  const SystemParams hundred = params(100, 800.0 / 24.0);
  EXPECT_NEAR(validity_parameter(hundred, 0.0), 0.30, 1e-12);
  EXPECT_EQ(classify_validity(validity_parameter(hundred, 0.0)), Validity::Marginal);
  EXPECT_NEAR(validity_parameter(params(100, 33), 0.0), 0.30, 0.005);
}

TEST(Validity, Classification) {
  EXPECT_EQ(classify_validity(0.05), Validity::Ok);
  EXPECT_EQ(classify_validity(0.1), Validity::Ok);
  EXPECT_EQ(classify_validity(0.2), Validity::Marginal);
  EXPECT_EQ(classify_validity(0.3), Validity::Marginal);
  EXPECT_EQ(classify_validity(0.31), Validity::Invalid);
  EXPECT_EQ(to_string(Validity::Marginal), "marginal");
  EXPECT_THROW(validity_parameter(params(3, 30), -1.0), PreconditionError);
}

TEST(Errors, CoefficientError) {
  Eigen::VectorXcd y(3);
  y << 1.0, cplx{0, 1}, -0.5;
  EXPECT_NEAR(coefficient_error(std::polar(1.0, 0.7) * y, y), 0.0, 1e-7);
  Eigen::VectorXcd x = y;
  x(2) = -0.55;
  // optimal phase is trivial here, so the error is the plain relative norm
  EXPECT_NEAR(coefficient_error(x, y), 0.05 / y.norm(), 1e-12);
  EXPECT_NEAR(entrywise_relative_error(x, y), 0.1, 2e-3);
}
