#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <random>

#include "ecqt/qstate.hpp"
#include "ecqt/serialize.hpp"

using namespace ecqt;

namespace {

Vec qubit(Cplx a, Cplx b) {
  Vec v(2);
  v << a, b;
  return v / v.norm();
}

// History sampled from exact evolution under sigma^3: amplitudes pick up
// phases e^{-i t} and e^{+i t}.
StateHistory sigma3_history(Cplx c1, Cplx c2, Real dt, int steps) {
  StateHistory h(0.0, dt, true);
  for (int k = 0; k <= steps; ++k) {
    const Real t = dt * k;
    h.append(qubit(c1 * std::exp(Cplx(0, -t)), c2 * std::exp(Cplx(0, t))));
  }
  return h;
}

Vec random_state(std::mt19937_64& rng, int d) {
  std::normal_distribution<Real> n;
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = Cplx(n(rng), n(rng));
  return v / v.norm();
}

// Loop-based bipartite marginal, independent of the library routine.
Mat marginal_loops(const Mat& rho, int d1, int d2, bool keep_first) {
  const int dk = keep_first ? d1 : d2;
  const int de = keep_first ? d2 : d1;
  Mat out = Mat::Zero(dk, dk);
  for (int a = 0; a < dk; ++a)
    for (int b = 0; b < dk; ++b)
      for (int e = 0; e < de; ++e) {
        const int r = keep_first ? a * d2 + e : e * d2 + a;
        const int c = keep_first ? b * d2 + e : e * d2 + b;
        out(a, b) += rho(r, c);
      }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("qstate");

TEST_CASE("pauli matrices and helpers") {
  CHECK(herm_residual(sigma(1)) == 0.0);
  CHECK(herm_residual(sigma(2)) == 0.0);
  CHECK((sigma(1) * sigma(2) - Cplx(0, 1) * sigma(3)).norm() == doctest::Approx(0.0));
  CHECK((sigma(3) * sigma(3) - ident(2)).norm() == doctest::Approx(0.0));
}

TEST_CASE("density validation tolerances") {
  CHECK_NOTHROW(validate_density(0.5 * ident(2)));
  Mat bad = 0.5 * ident(2);
  bad(0, 1) = Cplx(0, 1e-6);  // breaks hermiticity
  CHECK_THROWS_AS(validate_density(bad), InvalidState);
  CHECK_THROWS_AS(validate_density(Mat(0.7 * ident(2))), InvalidState);
  Mat neg(2, 2);
  neg << 1.5, 0, 0, -0.5;  // trace one, negative eigenvalue
  CHECK_THROWS_AS(validate_density(neg), InvalidState);
}

TEST_CASE("purity and projector") {
  const Vec plus = qubit(1, 1);
  CHECK(purity(projector(plus)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(is_pure(projector(plus)));
  CHECK(purity(0.5 * ident(2)) == doctest::Approx(0.5));
  CHECK_FALSE(is_pure(0.5 * ident(2)));
}

TEST_CASE("two_point frozen overlap") {
  StateHistory h(0.0, 1.0, true);
  h.append(qubit(1, 1));
  h.append(qubit(1, Cplx(0, 1)));
  const TwoPoint tp = two_point(h, 0.0, 1.0);
  CHECK(tp.has_phase);
  CHECK(tp.m.real() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tp.m.imag() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tp.w == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(tp.alpha == doctest::Approx(M_PI / 4).epsilon(1e-14));
  // reversing the pair conjugates
  const TwoPoint rev = two_point(h, 1.0, 0.0);
  CHECK(rev.m.real() == doctest::Approx(tp.m.real()));
  CHECK(rev.m.imag() == doctest::Approx(-tp.m.imag()));
}

TEST_CASE("two_point self overlap is one") {
  StateHistory h(0.0, 0.5, true);
  h.append(qubit(Cplx(0.3, 0.4), Cplx(-0.2, 0.84)));
  const TwoPoint tp = two_point(h, 0.0, 0.0);
  CHECK(tp.m.real() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(tp.m.imag()) < 1e-14);
}

TEST_CASE("two_point along sigma3 evolution") {
  const Real dt = M_PI / 200;
  // balanced superposition: overlap m_{0,a} = cos(a)
  auto h0 = sigma3_history(std::sqrt(0.5), std::sqrt(0.5), dt, 150);
  const Real a = M_PI / 2;  // 100 grid steps
  const TwoPoint tp0 = two_point(h0, 0.0, a);
  CHECK(std::abs(tp0.m) < 1e-12);
  const TwoPoint tp1 = two_point(h0, 0.0, 50 * dt);
  CHECK(tp1.m.real() == doctest::Approx(std::cos(50 * dt)).epsilon(1e-12));
  CHECK(std::abs(tp1.m.imag()) < 1e-12);

  // tilted superposition: m = cos(a) - i nu sin(a) with nu = |c1|^2 - |c2|^2
  const Real nu = 0.3 - 0.7;
  auto h1 = sigma3_history(std::sqrt(0.3), std::sqrt(0.7), 0.7 / 100, 120);
  const TwoPoint tp2 = two_point(h1, 0.0, 0.7);
  CHECK(tp2.m.real() == doctest::Approx(std::cos(0.7)).epsilon(1e-12));
  CHECK(tp2.m.imag() == doctest::Approx(-nu * std::sin(0.7)).epsilon(1e-12));
}

TEST_CASE("two_point for mixed history carries no phase") {
  StateHistory h(0.0, 1.0, false);
  h.append(Mat(0.5 * ident(2)));
  Mat r(2, 2);
  r << 0.75, 0.25, 0.25, 0.25;
  h.append(r);
  const TwoPoint tp = two_point(h, 0.0, 1.0);
  CHECK_FALSE(tp.has_phase);
  CHECK(tp.alpha == 0.0);
  const Real direct = std::sqrt((0.5 * ident(2) * r).trace().real());
  CHECK(tp.w == doctest::Approx(direct).epsilon(1e-14));
  CHECK_THROWS_AS(h.psi_at(0.0), PhaseUndefinedForMixed);
}

TEST_CASE("random pure pair: w^2 equals trace of product") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 25; ++rep) {
    StateHistory h(0.0, 1.0, true);
    const Vec v1 = random_state(rng, 2);
    const Vec v2 = random_state(rng, 2);
    h.append(v1);
    h.append(v2);
    const TwoPoint tp = two_point(h, 0.0, 1.0);
    const Real f = (projector(v1) * projector(v2)).trace().real();
    CHECK(tp.w * tp.w == doctest::Approx(f).epsilon(1e-12));
    CHECK(tp.w <= 1.0 + 1e-12);
  }
}

TEST_CASE("n_point chains consecutive overlaps") {
  const Real a = 0.6;
  auto h = sigma3_history(std::sqrt(0.5), std::sqrt(0.5), a / 50, 150);
  const TwoPoint triple = n_point(h, {0.0, a, 2 * a});
  CHECK(triple.m.real() == doctest::Approx(std::cos(a) * std::cos(a)).epsilon(1e-12));
  CHECK(std::abs(triple.m.imag()) < 1e-12);
  // w multiplies, alpha adds
  const TwoPoint t01 = two_point(h, 0.0, a);
  const TwoPoint t12 = two_point(h, a, 2 * a);
  CHECK(triple.w == doctest::Approx(t01.w * t12.w).epsilon(1e-12));
  // degenerate list of equal times
  const TwoPoint same = n_point(h, {a, a, a});
  CHECK(same.m.real() == doctest::Approx(1.0).epsilon(1e-14));
  // reversal conjugates
  const TwoPoint fwd = n_point(h, {0.0, a, 2 * a});
  const TwoPoint bwd = n_point(h, {2 * a, a, 0.0});
  CHECK(bwd.m.real() == doctest::Approx(fwd.m.real()).epsilon(1e-12));
  CHECK(bwd.m.imag() == doctest::Approx(-fwd.m.imag()).epsilon(1e-12));
  // pair case reduces to two_point exactly
  const TwoPoint pair = n_point(h, {0.0, a});
  CHECK(pair.m == t01.m);
}

TEST_CASE("history grid lookup") {
  StateHistory h(0.0, 0.1, true);
  for (int k = 0; k < 5; ++k) h.append(qubit(1, k));
  CHECK(h.index_of(0.3) == 3);
  CHECK(h.on_grid(0.2));
  CHECK_FALSE(h.on_grid(0.25));
  CHECK_THROWS_AS(h.index_of(0.25), OffGridTime);
  CHECK_THROWS_AS(h.index_of(0.5), OffGridTime);   // beyond last row
  CHECK_THROWS_AS(h.index_of(-0.1), OffGridTime);
}

TEST_CASE("partial_trace of Bell and product states") {
  Vec bell(4);
  bell << 1, 0, 0, 1;
  bell /= std::sqrt(2.0);
  const Mat rb = projector(bell);
  CHECK((partial_trace(rb, {2, 2}, 0) - 0.5 * ident(2)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((partial_trace(rb, {2, 2}, 1) - 0.5 * ident(2)).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(11);
  const Mat r1 = projector(random_state(rng, 2));
  const Mat r2 = projector(random_state(rng, 3));
  const Mat prod = kron(r1, r2);
  CHECK((partial_trace(prod, {2, 3}, 0) - r1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((partial_trace(prod, {2, 3}, 1) - r2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(partial_trace(prod, {2, 2}, 0), DimensionMismatch);
}

TEST_CASE("partial_trace marginal spectrum matches Schmidt weights") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec psi = random_state(rng, 4);
    Eigen::Matrix2cd amp;
    amp << psi(0), psi(1), psi(2), psi(3);
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(amp);
    const Mat marg = partial_trace(projector(psi), {2, 2}, 0);
    Eigen::SelfAdjointEigenSolver<Mat> es(marg, Eigen::EigenvaluesOnly);
    // both sorted ascending
    const Real s0 = svd.singularValues()(1), s1 = svd.singularValues()(0);
    CHECK(es.eigenvalues()(0) == doctest::Approx(s0 * s0).epsilon(1e-10));
    CHECK(es.eigenvalues()(1) == doctest::Approx(s1 * s1).epsilon(1e-10));
  }
}

TEST_CASE("partial_trace agrees with loop oracle and preserves trace") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 8; ++rep) {
    const Vec psi = random_state(rng, 6);
    const Mat rho = projector(psi);
    const Mat m0 = partial_trace(rho, {2, 3}, 0);
    const Mat m1 = partial_trace(rho, {2, 3}, 1);
    CHECK((m0 - marginal_loops(rho, 2, 3, true)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((m1 - marginal_loops(rho, 2, 3, false)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(m0.trace().real() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m1.trace().real() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("partial_trace_keep over several subsystems") {
  std::mt19937_64 rng(19);
  const Mat a = projector(random_state(rng, 2));
  const Mat b = projector(random_state(rng, 2));
  const Mat c = projector(random_state(rng, 2));
  const Mat joint = kron(kron(a, b), c);
  const Mat kept = partial_trace_keep(joint, {2, 2, 2}, {0, 2});
  CHECK((kept - kron(a, c)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("correlation_operator") {
  std::mt19937_64 rng(23);
  const Mat r1 = projector(random_state(rng, 2));
  const Mat r2 = projector(random_state(rng, 2));
  CHECK(correlation_operator(kron(r1, r2), {2, 2}).cwiseAbs().maxCoeff() < 1e-13);

  Vec bell(4);
  bell << 1, 0, 0, 1;
  bell /= std::sqrt(2.0);
  const Mat chi = correlation_operator(projector(bell), {2, 2});
  CHECK(std::abs(chi.trace()) < 1e-12);
  CHECK(herm_residual(chi) < 1e-14);
  CHECK(chi.norm() > 0.1);

  const Vec psi = random_state(rng, 4);
  const Mat chi2 = correlation_operator(projector(psi), {2, 2});
  CHECK(std::abs(chi2.trace()) < 1e-12);
}

TEST_CASE("history serialization round trips") {
  auto h = sigma3_history(std::sqrt(0.3), Cplx(0.2, 0.8) / std::abs(Cplx(0.2, 0.8)) * std::sqrt(0.7),
                          0.05, 12);
  const auto dir = std::filesystem::temp_directory_path() / "ecqt_qstate_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "hist.bin").string();
  history_save_binary(h, path);
  const StateHistory r = history_load_binary(path);
  REQUIRE(r.size() == h.size());
  CHECK(r.pure());
  CHECK(r.dt() == h.dt());
  CHECK(r.t0() == h.t0());
  for (std::size_t i = 0; i < h.size(); ++i)
    CHECK((r.psi_index(i) - h.psi_index(i)).norm() == 0.0);

  const auto j = history_to_json(h);
  const StateHistory rj = history_from_json(j);
  REQUIRE(rj.size() == h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    CHECK((rj.psi_index(i) - h.psi_index(i)).norm() == 0.0);

  // mixed histories carry full matrices
  StateHistory hm(0.0, 0.5, false);
  hm.append(Mat(0.5 * ident(2)));
  Mat r2(2, 2);
  r2 << 0.6, Cplx(0.1, 0.2), Cplx(0.1, -0.2), 0.4;
  hm.append(r2);
  const std::string path2 = (dir / "hist_mixed.bin").string();
  history_save_binary(hm, path2);
  const StateHistory rm = history_load_binary(path2);
  REQUIRE(rm.size() == 2);
  CHECK_FALSE(rm.pure());
  CHECK((rm.rho_index(1) - r2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("digest is stable") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == fnv1a_hex("a"));
  CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
}

TEST_SUITE_END();
