#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "ecqt/circuit.hpp"
#include "ecqt/errors.hpp"
#include "ecqt/integrator.hpp"
#include "ecqt/qstate.hpp"

using namespace ecqt;

TEST_SUITE_BEGIN("circuit");

namespace {

Mat expm(const Mat& m) { return m.exp(); }

Mat rand_density(std::mt19937_64& rng, int d) {
  std::normal_distribution<Real> g(0.0, 1.0);
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Cplx(g(rng), g(rng));
  Mat rho = a * a.adjoint();
  return rho / rho.trace().real();
}

Mat rand_unitary(std::mt19937_64& rng, int d) {
  std::normal_distribution<Real> g(0.0, 1.0);
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Cplx(g(rng), g(rng));
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
  return q;
}

Real unitary_defect(const Mat& u) {
  return (u.adjoint() * u - ident(static_cast<int>(u.rows())))
      .cwiseAbs()
      .maxCoeff();
}

Mat monomial_generator(Cplx lam, const Mat& rho, const Mat& rho_p) {
  return lam * rho * rho_p + std::conj(lam) * rho_p * rho;
}

// least-squares slope of log err against log delta
Real fit_slope(const std::vector<Real>& xs, const std::vector<Real>& ys) {
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  const Real n = static_cast<Real>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Real x = std::log(xs[i]), y = std::log(ys[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ProtocolTerm unit_disk_term(Cplx lam) {
  ProtocolTerm t;
  Real mag = std::abs(lam);
  if (mag > 1.0) {
    t.u = coupling_unitary(lam / mag);
    t.scale = mag;
  } else {
    t.u = coupling_unitary(lam);
    t.scale = 1.0;
  }
  t.gamma = projector(Vec::Unit(2, 0));
  return t;
}

MonomialTerm pair_term(Real a1, Real a2, Parity p) {
  MonomialTerm t;
  t.parity = p;
  MonomialFactor f1, f2;
  f1.a = a1;
  f2.a = a2;
  t.factors = {f1, f2};
  return t;
}

}  // namespace

TEST_CASE("gate matrices are exactly unitary") {
  std::mt19937_64 rng(11);
  CHECK(unitary_defect(hadamard()) <= 1e-14);
  for (Real d : {0.0, 0.05, 0.3, std::acos(-1.0) / 4})
    CHECK(unitary_defect(unbalanced_hadamard(d)) <= 1e-14);
  CHECK(unitary_defect(phase_shift(1.5707963267948966)) <= 1e-14);
  CHECK(unitary_defect(swap_matrix(2)) <= 1e-14);
  CHECK(unitary_defect(swap_matrix(3)) <= 1e-14);
  Mat u = rand_unitary(rng, 3);
  CHECK(unitary_defect(controlled_unitary(u, 0)) <= 1e-13);
  CHECK(unitary_defect(controlled_unitary(u, 1)) <= 1e-13);
  CHECK(unitary_defect(controlled_swap_gate({2, 2, 2, 2}, 1, 3)) <= 1e-14);
  CHECK(unitary_defect(coupling_unitary(Cplx(0.3, 0.0))) <= 1e-14);
  CHECK(unitary_defect(coupling_unitary(Cplx(1.0, 0.0))) <= 1e-14);
  CHECK(unitary_defect(coupling_unitary(std::polar(0.6, 1.1))) <= 1e-14);

  // the balanced angle reproduces the Hadamard, the zero angle a bit flip
  CHECK((unbalanced_hadamard(std::acos(-1.0) / 4) - hadamard())
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
  CHECK((unbalanced_hadamard(0.0) - sigma(1)).cwiseAbs().maxCoeff() <= 1e-14);

  CHECK(std::abs(coupling_unitary(Cplx(0.4, 0.2))(0, 0) - Cplx(0.4, 0.2)) <=
        1e-15);
  CHECK_THROWS_AS(coupling_unitary(Cplx(1.2, 0.0)), ConfigError);
  CHECK_THROWS_AS(controlled_unitary(Mat::Ones(2, 2), 1), NonUnitaryU);
}

TEST_CASE("controlled swaps fire on the zero level only") {
  std::vector<int> dims{2, 2, 2};
  Mat g = controlled_swap_gate(dims, 1, 2);
  // flat basis order |c x1 x2>: control is the slowest index
  Vec in0 = Vec::Unit(8, 1);   // |0 0 1>
  Vec want0 = Vec::Unit(8, 2); // |0 1 0>
  CHECK((Vec(g * in0) - want0).cwiseAbs().maxCoeff() <= 1e-15);
  Vec in1 = Vec::Unit(8, 5);   // |1 0 1> passes through
  CHECK((Vec(g * in1) - in1).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(controlled_swap_gate({3, 2, 2}, 1, 2), DimensionMismatch);
  CHECK_THROWS_AS(controlled_swap_gate({2, 2, 3}, 1, 2), DimensionMismatch);
  CHECK_THROWS_AS(controlled_swap_gate({2, 2, 2}, 1, 1), DimensionMismatch);
}

TEST_CASE("prepared control encodes the coupling trace") {
  std::mt19937_64 rng(23);
  Vec vp(2), vm(2);
  vp << 1.0, 1.0;
  vm << 1.0, -1.0;
  vp /= std::sqrt(2.0);
  vm /= std::sqrt(2.0);
  for (int d : {2, 3}) {
    Mat gam = rand_density(rng, d);
    Mat u = rand_unitary(rng, d);
    Cplx lam = (u * gam).trace();
    Real delta = 0.01;
    RegisterState greg = make_register({d}, gam);
    RegisterState ctrl = prepare_psi_lambda(greg, u, delta, false);
    CHECK(std::abs(ctrl.norm() - 1.0) <= 1e-13);
    Cplx cross = (vp.adjoint() * ctrl.dm * vm)(0, 0);
    Cplx lam_est = Cplx(0, 1) * cross / (std::sin(delta) * std::cos(delta));
    CHECK(std::abs(lam_est - lam) <= 1e-10);
    RegisterState conj = prepare_psi_lambda(greg, u, delta, true);
    Cplx cross_c = (vp.adjoint() * conj.dm * vm)(0, 0);
    Cplx lam_conj = Cplx(0, 1) * cross_c / (std::sin(delta) * std::cos(delta));
    CHECK(std::abs(lam_conj - std::conj(lam)) <= 1e-10);
  }

  // rank-one deviation falls off quadratically with the angle
  Mat gam = rand_density(rng, 2);
  Mat u = rand_unitary(rng, 2);
  Cplx lam = (u * gam).trace();
  RegisterState greg = make_register({2}, gam);
  auto ray_err = [&](Real delta) {
    RegisterState ctrl = prepare_psi_lambda(greg, u, delta, false);
    Vec psi = vm - Cplx(0, 1) * delta * lam * vp;
    psi /= psi.norm();
    return (ctrl.dm - projector(psi)).norm();
  };
  Real r = ray_err(1e-2) / ray_err(5e-3);
  CHECK(r >= 3.4);
  CHECK(r <= 4.6);

  CHECK_THROWS_AS(prepare_psi_lambda(greg, Mat::Ones(2, 2), 0.01, false),
                  NonUnitaryU);
  CHECK_THROWS_AS(prepare_psi_lambda(greg, rand_unitary(rng, 3), 0.01, false),
                  DimensionMismatch);
}

TEST_CASE("swap contractions match operator products") {
  std::mt19937_64 rng(31);
  std::normal_distribution<Real> g(0.0, 1.0);
  for (int d : {2, 3}) {
    Mat a(d, d), b(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        a(i, j) = Cplx(g(rng), g(rng));
        b(i, j) = Cplx(g(rng), g(rng));
      }
    Mat s = swap_matrix(d);
    Cplx full = (s * kron(a, b)).trace();
    CHECK(std::abs(full - (a * b).trace()) <= 1e-12);
    Mat left = partial_trace(s * kron(a, b), {d, d}, 1);
    CHECK((left - a * b).cwiseAbs().maxCoeff() <= 1e-12);
    Mat right = partial_trace(kron(a, b) * s, {d, d}, 1);
    CHECK((right - b * a).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("half step tracks the one sided generator") {
  std::mt19937_64 rng(41);
  Mat rho = rand_density(rng, 2);
  Mat rho_p = rand_density(rng, 2);
  Mat sig = rand_density(rng, 2);
  Cplx lam = std::polar(0.8, 0.7);
  ProtocolTerm term = unit_disk_term(lam);
  RegisterState greg = make_register({2}, term.gamma);

  auto err = [&](Real delta) {
    RegisterState psi = prepare_psi_lambda(greg, term.u, delta, false);
    Mat out = dme_halfstep(psi, rho, rho_p, sig).dm;
    Mat exact = expm(Cplx(0, -delta) * lam * rho * rho_p) * sig *
                expm(Cplx(0, delta) * std::conj(lam) * rho_p * rho);
    return (out - exact).norm();
  };
  CHECK(err(1e-3) <= 10.0 * 1e-6);
  CHECK(err(1e-2) <= 10.0 * 1e-4);

  RegisterState psi = prepare_psi_lambda(greg, term.u, 1e-3, false);
  CHECK_THROWS_AS(dme_halfstep(psi, rho, rho_p, rand_density(rng, 3)),
                  DimensionMismatch);
  RegisterState two = make_register({2, 2}, kron(term.gamma, term.gamma));
  CHECK_THROWS_AS(dme_halfstep(two, rho, rho_p, sig), DimensionMismatch);
}

TEST_CASE("monomial step is second order in the angle") {
  std::mt19937_64 rng(43);
  Mat rho = rand_density(rng, 2);
  Mat rho_p = rand_density(rng, 2);
  Mat sig = rand_density(rng, 2);
  Cplx lam(0.6, -0.45);
  ProtocolTerm term = unit_disk_term(lam);

  std::vector<Real> deltas{1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 1e-4};
  std::vector<Real> errs;
  Mat h = monomial_generator(lam, rho, rho_p);
  for (Real delta : deltas) {
    Mat out = monomial_step(term, rho, rho_p, sig, delta).dm;
    out /= out.trace().real();
    Mat exact = expm(Cplx(0, -delta) * h) * sig * expm(Cplx(0, delta) * h);
    errs.push_back((out - exact).norm());
  }
  Real slope = fit_slope(deltas, errs);
  CHECK(slope >= 1.9);
  CHECK(slope <= 2.1);
  CHECK(errs.front() <= 10.0 * deltas.front() * deltas.front());
}

TEST_CASE("monomial step composes and reverses") {
  std::mt19937_64 rng(47);
  Mat rho = rand_density(rng, 2);
  Mat rho_p = rand_density(rng, 2);
  Mat sig = rand_density(rng, 2);
  Real delta = 2e-3;

  ProtocolTerm term = unit_disk_term(Cplx(0.5, 0.3));
  Mat fwd = monomial_step(term, rho, rho_p, sig, delta).dm;
  Mat back = monomial_step(term, rho, rho_p, fwd, -delta).dm;
  back /= back.trace().real();
  CHECK((back - sig).norm() <= 20.0 * delta * delta);

  // the scale rides the interferometer angle, reaching couplings
  // outside the unit disk
  ProtocolTerm big = unit_disk_term(Cplx(2.0, -1.5));
  CHECK(std::abs(term_coupling(big) - Cplx(2.0, -1.5)) <= 1e-12);
  Mat out = monomial_step(big, rho, rho_p, sig, delta).dm;
  out /= out.trace().real();
  Mat h = monomial_generator(Cplx(2.0, -1.5), rho, rho_p);
  Mat exact = expm(Cplx(0, -delta) * h) * sig * expm(Cplx(0, delta) * h);
  Real eff = delta * big.scale;
  CHECK((out - exact).norm() <= 10.0 * eff * eff);
}

TEST_CASE("pure equal factors realize a bare coupling") {
  std::mt19937_64 rng(53);
  Vec psi(2);
  psi << Cplx(0.6, 0.0), std::polar(0.8, 0.5);
  Mat rho = projector(psi);
  Mat sig = rand_density(rng, 2);
  Real bare = 1.4;  // target generator bare * rho
  Real delta = 1e-3;

  ProtocolTerm term = unit_disk_term(Cplx(bare / 2, 0.0));
  Mat out = monomial_step(term, rho, rho, sig, delta).dm;
  out /= out.trace().real();
  Mat u = ident(2) + (std::exp(Cplx(0, -delta * bare)) - Cplx(1.0)) * rho;
  Mat exact = u * sig * u.adjoint();
  CHECK((out - exact).norm() <= 10.0 * delta * delta);
}

TEST_CASE("trotter driver halves its error when steps double") {
  std::mt19937_64 rng(59);
  Mat rho = rand_density(rng, 2);
  Mat rho_p = rand_density(rng, 2);
  Mat sig0 = rand_density(rng, 2);
  Cplx lam(0.45, 0.35);
  Real t = 0.4;
  Mat h = monomial_generator(lam, rho, rho_p);
  Mat exact = expm(Cplx(0, -t) * h) * sig0 * expm(Cplx(0, t) * h);

  HistorySupplier constant_factors = [&](int, int, const Mat&) {
    return std::make_pair(rho, rho_p);
  };
  std::vector<Real> errs;
  for (int m : {10, 20, 40}) {
    ProtocolSpec p;
    p.dim = 2;
    p.terms = {unit_disk_term(lam)};
    p.steps = m;
    p.delta = t / static_cast<Real>(m);
    TrotterResult res = trotter_simulate(p, sig0, constant_factors);
    Real e = (res.sigma - exact).norm();
    CHECK(e <= res.error_bound);
    errs.push_back(e);
  }
  CHECK(errs[0] / errs[1] >= 1.5);
  CHECK(errs[0] / errs[1] <= 3.0);
  CHECK(errs[1] / errs[2] >= 1.5);
  CHECK(errs[1] / errs[2] <= 3.0);
}

TEST_CASE("a shared pure fixed point is exact at any coupling") {
  // with all factor slots equal to a pure state every contraction in the
  // marginal is proportional to that state, so the step is exact; mixed
  // states pick up matrix-power terms and only fix the flow to O(delta^2)
  Vec psi(2);
  psi << Cplx(0.28, 0.45), std::polar(0.85, -0.6);
  psi /= psi.norm();
  Mat sig0 = projector(psi);
  HistorySupplier echo = [&](int, int, const Mat& s) {
    return std::make_pair(s, s);
  };
  ProtocolSpec p;
  p.dim = 2;
  p.terms = {unit_disk_term(Cplx(0.7, 0.4))};
  p.steps = 50;
  p.delta = 0.02;
  TrotterResult res = trotter_simulate(p, sig0, echo);
  CHECK((res.sigma - sig0).norm() <= 1e-12);
}

TEST_CASE("trotter guards reject bad configurations") {
  std::mt19937_64 rng(67);
  Mat sig0 = rand_density(rng, 2);
  HistorySupplier sup = [&](int, int, const Mat& s) {
    return std::make_pair(s, s);
  };
  ProtocolSpec p;
  p.dim = 2;
  p.terms = {unit_disk_term(Cplx(0.8, 0.0))};
  p.steps = 10;
  p.delta = 0.2;  // 0.2 * 0.8 = 0.16 beyond the linear regime
  CHECK_THROWS_AS(trotter_simulate(p, sig0, sup), ConfigError);
  p.delta = 0.01;
  p.steps = 0;
  CHECK_THROWS_AS(trotter_simulate(p, sig0, sup), ConfigError);
  p.steps = 2000000;
  CHECK_THROWS_AS(trotter_simulate(p, sig0, sup), StepBudgetExceeded);
  p.steps = 10;
  p.terms.clear();
  CHECK_THROWS_AS(trotter_simulate(p, sig0, sup), ConfigError);
  p.terms = {unit_disk_term(Cplx(0.8, 0.0))};
  CHECK_THROWS_AS(trotter_simulate(p, rand_density(rng, 3), sup),
                  DimensionMismatch);
}

TEST_CASE("split hamiltonian separates signed parts") {
  SplitHamiltonian s3 = split_hamiltonian(sigma(3));
  CHECK(s3.trace_plus == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s3.trace_minus == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((s3.rho_plus - projector(Vec::Unit(2, 0))).norm() <= 1e-13);
  CHECK((s3.rho_minus - projector(Vec::Unit(2, 1))).norm() <= 1e-13);

  Mat psd = Mat::Zero(2, 2);
  psd(0, 0) = 2.0;
  psd(1, 1) = 1.0;
  SplitHamiltonian sp = split_hamiltonian(psd);
  CHECK(sp.trace_minus == 0.0);
  CHECK(sp.rho_minus.norm() == 0.0);
  CHECK(sp.trace_plus == doctest::Approx(3.0).epsilon(1e-14));

  std::mt19937_64 rng(71);
  std::normal_distribution<Real> g(0.0, 1.0);
  Mat a(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = Cplx(g(rng), g(rng));
  Mat h = a + a.adjoint();
  SplitHamiltonian sh = split_hamiltonian(h);
  Mat rebuilt = sh.trace_plus * sh.rho_plus - sh.trace_minus * sh.rho_minus;
  CHECK((rebuilt - h).norm() <= 1e-12);
  CHECK(std::abs(sh.rho_plus.trace().real() - 1.0) <= 1e-12);
  CHECK((sh.rho_plus * sh.rho_minus).norm() <= 1e-12);

  CHECK_THROWS_AS(split_hamiltonian(Mat::Zero(2, 2)), ZeroOperator);
  Mat nh = Mat::Zero(2, 2);
  nh(0, 1) = 1.0;
  CHECK_THROWS_AS(split_hamiltonian(nh), NonHermitianHamiltonian);
}

TEST_CASE("density matrix exponentiation approaches the rank one rotation") {
  Vec plus(2);
  plus << 1.0, 1.0;
  plus /= std::sqrt(2.0);
  Mat rho = projector(Vec::Unit(2, 0));
  Mat sig = projector(plus);
  Real t = std::acos(-1.0) / 2;
  int n = 400;

  Mat u = ident(2) + (std::exp(Cplx(0, -t)) - Cplx(1.0)) * rho;
  Mat exact = u * sig * u.adjoint();
  Mat out = dme_exponentiate(rho, sig, t, n, 1);
  CHECK((out - exact).norm() <= 2.0 * t * t / static_cast<Real>(n));

  CHECK((dme_exponentiate(rho, sig, 0.0, 5, 1) - sig).norm() == 0.0);

  Mat back = dme_exponentiate(rho, out, t, n, -1);
  CHECK((back - sig).norm() <= 4.0 * t * t / static_cast<Real>(n));

  std::mt19937_64 rng(73);
  Mat gen = rand_density(rng, 2);
  Mat s0 = rand_density(rng, 2);
  Real t2 = 0.3;
  Mat ex2 = expm(Cplx(0, -t2) * gen) * s0 * expm(Cplx(0, t2) * gen);
  CHECK((dme_exponentiate(gen, s0, t2, 500, 1) - ex2).norm() <= 5e-4);

  CHECK_THROWS_AS(dme_exponentiate(gen, s0, 0.1, 0, 1), ConfigError);
  CHECK_THROWS_AS(dme_exponentiate(gen, s0, 0.1, 5, 2), ConfigError);
  CHECK_THROWS_AS(dme_exponentiate(gen, s0, -0.1, 5, 1), ConfigError);
}

TEST_CASE("general protocol step follows the split flow") {
  std::mt19937_64 rng(79);
  Mat h = 0.8 * sigma(1) + 0.3 * sigma(2) + 0.5 * sigma(3);
  Mat rho0 = rand_density(rng, 2);
  Real dt = 0.1;
  Mat exact = expm(Cplx(0, -dt) * h) * rho0 * expm(Cplx(0, dt) * h);
  Mat out = general_protocol_step(h, rho0, dt, 400, 400);
  CHECK((out - exact).norm() <= 5e-4);

  // the split parts commute, so pass order only moves discretization noise
  SplitHamiltonian sp = split_hamiltonian(h);
  Mat swapped = dme_exponentiate(sp.rho_minus, rho0, dt * sp.trace_minus, 400, -1);
  swapped = dme_exponentiate(sp.rho_plus, swapped, dt * sp.trace_plus, 400, 1);
  CHECK((swapped - out).norm() <= 2e-4);

  Mat psd = Mat::Zero(2, 2);
  psd(0, 0) = 1.2;
  psd(1, 1) = 0.4;
  Mat single = dme_exponentiate(psd / psd.trace().real(), rho0,
                                dt * psd.trace().real(), 50, 1);
  CHECK((general_protocol_step(psd, rho0, dt, 50, 50) - single).norm() <= 1e-14);

  CHECK((general_protocol_step(h, rho0, 0.0, 10, 10) - rho0).norm() == 0.0);
  CHECK_THROWS_AS(general_protocol_step(Mat::Zero(2, 2), rho0, dt, 10, 10),
                  ZeroOperator);
}

TEST_CASE("resource model reports the scaling laws") {
  ResourceEstimate r = resource_estimate(1, 2, 2, 1.0, 0.1);
  CHECK(r.systems_per_step == 10);
  CHECK(r.trotter_steps == 10);
  std::uint64_t want = 1;
  for (int i = 0; i < 10; ++i) want *= 8;
  CHECK(r.total_copies == want);
  CHECK(r.simulator_dimension_exponent == want);

  ResourceEstimate r2 = resource_estimate(1, 2, 2, 1.0, 0.05);
  CHECK(r2.trotter_steps == 2 * r.trotter_steps);

  ResourceEstimate sat = resource_estimate(1, 2, 2, 10.0, 1e-3);
  CHECK(sat.trotter_steps == 100000);
  CHECK(sat.total_copies == std::numeric_limits<std::uint64_t>::max());

  ResourceEstimate tiny = resource_estimate(1, 1, 1, 0.01, 1.0);
  CHECK(tiny.trotter_steps == 1);
  CHECK(tiny.total_copies == 4);

  CHECK_THROWS_AS(resource_estimate(0, 2, 2, 1.0, 0.1), ConfigError);
  CHECK_THROWS_AS(resource_estimate(1, 2, 2, 0.0, 0.1), ConfigError);
  CHECK_THROWS_AS(resource_estimate(1, 2, 2, 1.0, 0.0), ConfigError);
}

TEST_CASE("postselection preserves the branch ledger") {
  std::mt19937_64 rng(83);
  RegisterState r = make_register({2, 2, 2}, rand_density(rng, 8));
  RegisterState rot = apply_unitary(r, rand_unitary(rng, 8));
  CHECK(std::abs(rot.norm() - 1.0) <= 1e-12);
  Real total = 0.0;
  for (int outcome : {0, 1}) total += postselect(rot, 1, outcome).norm();
  CHECK(std::abs(total - rot.norm()) <= 1e-12);
  RegisterState kept = marginal(rot, {0, 2});
  CHECK(kept.dims == std::vector<int>{2, 2});
  CHECK(std::abs(kept.norm() - 1.0) <= 1e-12);
  CHECK_THROWS_AS(apply_unitary(r, Mat::Ones(8, 8)), NonUnitaryU);
}

TEST_CASE("register validation guards") {
  std::mt19937_64 rng(89);
  Mat rho = rand_density(rng, 4);
  CHECK_THROWS_AS(make_register({2, 3}, rho), DimensionMismatch);
  Mat skew = rho;
  skew(0, 1) += Cplx(0.0, 0.2);
  CHECK_THROWS_AS(make_register({2, 2}, skew), InvalidState);
  CHECK_THROWS_AS(make_register({2, 2}, Mat(1.5 * rho)), InvalidState);
  Mat neg = rho - Mat(0.5 * ident(4));
  CHECK_THROWS_AS(make_register({2, 2}, neg), InvalidState);
  RegisterState r = make_register({2, 2}, rho);
  CHECK_THROWS_AS(postselect(r, 0, 5), ConfigError);
  CHECK_THROWS_AS(postselect(r, 3, 0), DimensionMismatch);
  CHECK_THROWS_AS(marginal(r, {0, 7}), DimensionMismatch);
  RegisterState half = make_register({2, 2}, Mat(0.5 * rho));
  CHECK(std::abs(half.norm() - 0.5) <= 1e-12);
}

TEST_CASE("noise emulation is seeded and scales with shots") {
  Mat h = 0.8 * sigma(1) + 0.5 * sigma(3);
  Mat n1 = noisy_hamiltonian(h, 10000, 7);
  Mat n2 = noisy_hamiltonian(h, 10000, 7);
  CHECK((n1 - n2).norm() == 0.0);
  Mat n3 = noisy_hamiltonian(h, 10000, 8);
  CHECK((n1 - n3).norm() > 0.0);
  CHECK(herm_residual(n1) <= 1e-15);
  Mat n4 = noisy_hamiltonian(h, 100000000, 7);
  Real ratio = (n1 - h).norm() / (n4 - h).norm();
  CHECK(ratio == doctest::Approx(100.0).epsilon(1e-9));
  CHECK_THROWS_AS(noisy_hamiltonian(h, 0, 7), ConfigError);
}

TEST_CASE("circuit protocol tracks the delay integrator over a memory interval") {
  const Real a = 0.4;
  const Real lam_r = 0.3;
  const Real lam_i = 0.2;
  Mat kicker = 0.7 * sigma(1);
  Mat rho0 = projector(Vec::Unit(2, 0));

  ECHamiltonianSpec spec;
  spec.dim = 2;
  spec.terms.push_back(
      {pair_term(a, 0.0, Parity::Plus), CouplingSchedule::constant_value(lam_r)});
  spec.terms.push_back(
      {pair_term(a, 0.0, Parity::Minus), CouplingSchedule::constant_value(lam_i)});

  IntegratorConfig cfg;
  cfg.dt = 1e-4;
  cfg.horizon = 2.0 * a;
  cfg.assembly = AssemblyRule::Midpoint;
  Trajectory traj = evolve(spec, kicker, rho0, cfg);
  Mat ref = traj.history.rho_at(2.0 * a);

  auto past_state = [&](Real t) {
    Mat u = expm(Cplx(0, -t) * kicker);
    return Mat(u * rho0 * u.adjoint());
  };

  const int m = 200;
  ProtocolSpec p;
  p.dim = 2;
  p.terms = {unit_disk_term(Cplx(lam_r, lam_i))};
  p.steps = m;
  p.delta = a / static_cast<Real>(m);
  HistorySupplier delay_line = [&](int k, int, const Mat& s) {
    return std::make_pair(past_state(static_cast<Real>(k) * p.delta), s);
  };
  TrotterResult res = trotter_simulate(p, past_state(a), delay_line);

  Real err = (res.sigma - ref).norm();
  CHECK(err <= res.error_bound);
  Real c_fit = err * static_cast<Real>(m) / (a * a);
  CHECK(c_fit <= 10.0);
}

TEST_SUITE_END();
