#include "lindblad_lab/fock.hpp"
#include "lindblad_lab/quadrature.hpp"
#include "lindblad_lab/trajectory.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace lindblad_lab;
using lab_test::random_density;
using lab_test::random_hermitian;
using lab_test::random_operator;

namespace {

Operator sx() { return (Operator(2, 2) << 0, 1, 1, 0).finished(); }
Operator sy() { return (Operator(2, 2) << 0, -kI, kI, 0).finished(); }
Operator sz() { return (Operator(2, 2) << 1, 0, 0, -1).finished(); }
Operator sm() { return (Operator(2, 2) << 0, 0, 1, 0).finished(); }

}  // namespace

TEST(Kron, IdentityTimesIdentity) { EXPECT_EQ(max_abs(kron(identity(2), identity(3)) - identity(6)), 0.0); }

TEST(Kron, SigmaZWithIdentity) {
  Operator expect = Operator::Zero(4, 4);
  expect.diagonal() << 1, 1, -1, -1;
  EXPECT_EQ(max_abs(kron(sz(), identity(2)) - expect), 0.0);
}

TEST(Kron, LowersAtomRaisesMode) {
  // |e> = e_0, |0> = e_0 of the mode, so |e,0> = e_0 and |g,1> = e_3.
  const auto [a, ad] = build_bath_ops(FockSpace(1, 1), 1);
  const Eigen::VectorXcd out = kron(sm(), ad) * Eigen::VectorXcd::Unit(4, 0);
  EXPECT_LT((out - Eigen::VectorXcd::Unit(4, 3)).norm(), 1e-15);
}

TEST(Kron, MatchesIndexFormula) {
  std::mt19937 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const Operator a = random_operator(rng, lab_test::uniform_int(rng, 1, 4));
    const Operator b = random_operator(rng, lab_test::uniform_int(rng, 1, 4));
    EXPECT_EQ(max_abs(kron(a, b) - lab_test::kron_loops(a, b)), 0.0);
  }
}

TEST(Kron, Associative) {
  std::mt19937 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const Operator a = random_operator(rng, 2), b = random_operator(rng, 3), c = random_operator(rng, 2);
    EXPECT_LE(max_abs(kron(kron(a, b), c) - kron(a, kron(b, c))), 1e-14);
  }
}

TEST(PartialTrace, ProductState) {
  std::mt19937 rng(1);
  const Operator rs = random_density(rng, 2), rb = random_density(rng, 3);
  EXPECT_LE(max_abs(partial_trace_b(kron(rs, rb), {2, 3}) - rs), 1e-15);
}

TEST(PartialTrace, BellStateIsMaximallyMixed) {
  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(4);
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  EXPECT_LE(max_abs(partial_trace_b(projector(phi), {2, 2}) - 0.5 * identity(2)), 1e-15);
}

TEST(PartialTrace, TracelessFactorVanishes) {
  EXPECT_EQ(max_abs(partial_trace_b(kron(sx(), sx()), {2, 2})), 0.0);
}

TEST(PartialTrace, DimensionMismatchRejected) {
  EXPECT_THROW(partial_trace_b(identity(6), {2, 2}), InvalidInput);
}

TEST(PartialTrace, RandomCompositesPreserveTraceAndMatchLoops) {
  std::mt19937 rng(2);
  for (int rep = 0; rep < 30; ++rep) {
    const int ds = lab_test::uniform_int(rng, 1, 6), db = lab_test::uniform_int(rng, 1, 6);
    const Operator rho = random_density(rng, ds * db);
    const Operator red = partial_trace_b(rho, {ds, db});
    EXPECT_LE(std::abs(red.trace() - rho.trace()), 1e-12);
    EXPECT_LE(max_abs(red - lab_test::ptrace_loops(rho, ds, db)), 1e-14);
  }
}

TEST(Commutator, Pauli) {
  EXPECT_EQ(max_abs(commutator(sz(), sz())), 0.0);
  EXPECT_LE(max_abs(commutator(sx(), sy()) - 2.0 * kI * sz()), 1e-15);
  Operator expect = Operator::Zero(2, 2);
  expect(0, 0) = 2.0;
  EXPECT_LE(max_abs(anticommutator(sm().adjoint() * sm(), identity(2)) - expect), 1e-15);
}

TEST(Commutator, DimensionMismatchRejected) { EXPECT_THROW(commutator(identity(2), identity(3)), InvalidInput); }

TEST(MatrixExp, Examples) {
  EXPECT_EQ(max_abs(matrix_exp(zeros(2)) - identity(2)), 0.0);
  Operator d = Operator::Zero(2, 2);
  d.diagonal() << 0.3, -1.7;
  Operator ed = Operator::Zero(2, 2);
  ed.diagonal() << std::exp(0.3), std::exp(-1.7);
  EXPECT_LE(max_abs(matrix_exp(d) - ed), 1e-15);
  Operator expect = Operator::Zero(2, 2);
  expect.diagonal() << kI, -kI;
  EXPECT_LE(max_abs(matrix_exp(kI * (kPi / 2) * sz()) - expect), 1e-15);
}

TEST(MatrixExp, NonFiniteRejected) {
  Operator a = identity(2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(matrix_exp(a), InvalidInput);
}

TEST(MatrixExp, InverseAndTaylorAgreement) {
  std::mt19937 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index d = lab_test::uniform_int(rng, 1, 6);
    Operator a = random_operator(rng, d);
    a *= lab_test::uniform(rng, 0.1, 5.0) / spectral_norm(a);
    EXPECT_LE(max_abs(matrix_exp(a) * matrix_exp(-a) - identity(d)), 1e-10);
    EXPECT_LE(max_abs(matrix_exp(a) - lab_test::expm_taylor(a)), 1e-10 * std::exp(5.0));
  }
}

TEST(MatrixExp, UnitaryFromHermitian) {
  std::mt19937 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index d = lab_test::uniform_int(rng, 1, 8);
    const Operator h = random_hermitian(rng, d, 2.0);
    const double t = lab_test::uniform(rng, 0.0, 10.0);
    const Operator u = matrix_exp(-kI * t * h);
    EXPECT_LE(max_abs(u.adjoint() * u - identity(d)), 1e-10);
    EXPECT_LE(max_abs(u - lab_test::expm_taylor(-kI * t * h)), 1e-9);
    EXPECT_LE(max_abs(matrix_exp(h) - lab_test::expm_taylor(h)), 1e-9 * std::exp(spectral_norm(h)));
  }
}

TEST(TraceDistance, Examples) {
  std::mt19937 rng(5);
  const Operator r = random_density(rng, 3);
  EXPECT_LE(trace_distance(r, r), 1e-15);
  EXPECT_NEAR(trace_distance(projector(Eigen::VectorXcd::Unit(2, 0)), projector(Eigen::VectorXcd::Unit(2, 1))), 1.0,
              1e-15);
  EXPECT_NEAR(eig_min_hermitian(sz()), -1.0, 1e-15);
}

TEST(TraceDistance, MatchesEigenvalueFormulaAndIsBounded) {
  std::mt19937 rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index d = lab_test::uniform_int(rng, 1, 5);
    const Operator a = rep % 2 ? lab_test::random_pure(rng, d) : random_density(rng, d);
    const Operator b = random_density(rng, d);
    const double td = trace_distance(a, b);
    EXPECT_NEAR(td, lab_test::trace_distance_eig(a, b), 1e-12);
    EXPECT_GE(td, 0.0);
    EXPECT_LE(td, 1.0 + 1e-12);
  }
}

TEST(DensityMatrix, ValidatesInvariants) {
  EXPECT_NO_THROW(DensityMatrix(0.5 * identity(2)));
  EXPECT_THROW(DensityMatrix(identity(2)), InvalidInput);  // trace 2
  Operator nonherm = 0.5 * identity(2);
  nonherm(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix{nonherm}, InvalidInput);
  Operator neg = Operator::Zero(2, 2);
  neg.diagonal() << 1.5, -0.5;
  EXPECT_THROW(DensityMatrix{neg}, InvalidInput);
  // Within tolerance is accepted as-is, not repaired.
  Operator near = 0.5 * identity(2);
  near(0, 0) += 5e-10;
  EXPECT_EQ(DensityMatrix(near).op()(0, 0), near(0, 0));
}

TEST(Vectorization, ColumnStacking) {
  std::mt19937 rng(7);
  const Operator a = random_operator(rng, 3), b = random_operator(rng, 3), r = random_operator(rng, 3);
  const Eigen::VectorXcd v = vec(r);
  EXPECT_EQ(v(1), r(1, 0));  // second entry is the first column's second row
  EXPECT_EQ(v(3), r(0, 1));
  EXPECT_LE((vec(a * r * b) - kron(b.transpose(), a) * v).norm(), 1e-12);
  EXPECT_EQ(max_abs(unvec(v, 3) - r), 0.0);
}

TEST(TimeGrid, Validation) {
  EXPECT_THROW(TimeGrid(std::vector<double>{}), InvalidInput);
  EXPECT_THROW(TimeGrid({0.1, 0.2}), InvalidInput);
  EXPECT_THROW(TimeGrid({0.0, 0.2, 0.2}), InvalidInput);
  const TimeGrid g = TimeGrid::uniform(2.0, 4);
  EXPECT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g[2], 1.0);
  EXPECT_TRUE(g.is_uniform());
  EXPECT_FALSE(TimeGrid({0.0, 0.1, 0.3}).is_uniform());
}

TEST(CptpReport, FlagsFirstBreach) {
  Trajectory t;
  t.push(0.0, 0.5 * identity(2));
  Operator bad = Operator::Zero(2, 2);
  bad.diagonal() << 1.01, -0.01;
  t.push(1.0, bad);
  t.push(2.0, bad);
  const CptpReport r = cptp_report(t);
  ASSERT_TRUE(r.failed());
  EXPECT_EQ(*r.breach_node, 1u);
  EXPECT_NEAR(r.min_eig, -0.01, 1e-15);
}

TEST(Fock, LadderOperators) {
  const auto [a, ad] = build_bath_ops(FockSpace(1, 1), 1);
  EXPECT_EQ(max_abs(a - (Operator(2, 2) << 0, 1, 0, 0).finished()), 0.0);
  EXPECT_EQ((a * FockSpace(1, 1).vacuum()).norm(), 0.0);

  const FockSpace s(2, 3);
  for (int k = 1; k <= 2; ++k) {
    const auto [ak, akd] = build_bath_ops(s, k);
    const Operator c = ak * akd - akd * ak;
    for (Eigen::Index i = 0; i < s.dim(); ++i)
      for (Eigen::Index j = 0; j < s.dim(); ++j) {
        // Exact identity away from the truncation edge of mode k.
        if (occupation(s, i, k) == s.n_max || occupation(s, j, k) == s.n_max) continue;
        EXPECT_LE(std::abs(c(i, j) - (i == j ? 1.0 : 0.0)), 1e-14);
      }
    EXPECT_NEAR(c(s.dim() - 1, s.dim() - 1).real(), -3.0, 1e-14);  // -n_max at |n_max,n_max>
  }
  // Different modes commute.
  const auto [a1, a1d] = build_bath_ops(s, 1);
  const auto [a2, a2d] = build_bath_ops(s, 2);
  EXPECT_LE(max_abs(commutator(a1, a2d)), 1e-14);
  EXPECT_THROW(build_bath_ops(s, 0), InvalidInput);
  EXPECT_THROW(build_bath_ops(s, 3), InvalidInput);
}

TEST(Fock, DenseCap) { EXPECT_THROW(FockSpace(13, 1), InvalidInput); }

TEST(Quadrature, SimpsonExactOnCubics) {
  const double v = quad::simpson([](double x) { return x * x * x - 2 * x + 1; }, 0.0, 2.0, 2);
  EXPECT_NEAR(v, 4.0 - 4.0 + 2.0, 1e-14);
}

TEST(Quadrature, PrincipalValueOfShiftedPole) {
  // PV int_{-1}^{3} 1/w dw = ln 3 with the function 1 on the numerator.
  const auto pv = quad::principal_value_over_omega([](double) { return 1.0; }, -1.0, 3.0, 0.5, 5);
  EXPECT_NEAR(pv.value, std::log(3.0), 1e-12);
  // Pole on the endpoint with f(0) != 0 diverges.
  EXPECT_THROW(quad::principal_value_over_omega([](double) { return 1.0; }, 0.0, 3.0, 0.5, 5), InvalidInput);
}
