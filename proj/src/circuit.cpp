#include "ecqt/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ecqt/errors.hpp"

namespace ecqt {

namespace {

constexpr Real kUnitaryTol = 1e-10;
constexpr Real kMaxStepAngle = 0.1;      // delta * max|lam| must stay below
constexpr Real kTrotterC = 4.0;          // first-order envelope constant
constexpr std::uint64_t kStepBudget = 1000000;

int total_dim(const std::vector<int>& dims) {
  int n = 1;
  for (int d : dims) n *= d;
  return n;
}

void check_unitary(const Mat& u) {
  if (u.rows() != u.cols()) throw NonUnitaryU("unitary must be square");
  Mat r = u.adjoint() * u - ident(static_cast<int>(u.rows()));
  if (r.cwiseAbs().maxCoeff() > kUnitaryTol)
    throw NonUnitaryU("matrix is not unitary within tolerance");
}

std::vector<int> digits_of(int flat, const std::vector<int>& dims) {
  std::vector<int> dig(dims.size());
  for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
    dig[i] = flat % dims[i];
    flat /= dims[i];
  }
  return dig;
}

int flat_of(const std::vector<int>& dig, const std::vector<int>& dims) {
  int flat = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) flat = flat * dims[i] + dig[i];
  return flat;
}

// sigma slots in mid-protocol branches carry an O(delta) trace defect; only
// shape and Hermiticity are enforced for them.
void check_operator(const Mat& m, int d, const char* what) {
  if (m.rows() != d || m.cols() != d)
    throw DimensionMismatch(what);
  if (herm_residual(m) > 1e-8) throw InvalidState(what);
}

}  // namespace

RegisterState make_register(const std::vector<int>& dims, const Mat& dm) {
  if (dims.empty()) throw DimensionMismatch("register needs at least one subsystem");
  for (int d : dims)
    if (d < 2) throw DimensionMismatch("subsystem dimensions must be >= 2");
  int n = total_dim(dims);
  if (dm.rows() != n || dm.cols() != n)
    throw DimensionMismatch("density matrix does not match the subsystem dimensions");
  if (herm_residual(dm) > kHermTol)
    throw InvalidState("register state must be Hermitian");
  Real tr = dm.trace().real();
  if (tr < -kTraceTol || tr > 1.0 + kTraceTol)
    throw InvalidState("register weight must lie in [0, 1]");
  Eigen::SelfAdjointEigenSolver<Mat> es(dm, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kEigFloor)
    throw InvalidState("register state must be positive semidefinite");
  return RegisterState{dims, dm};
}

RegisterState tensor(const RegisterState& a, const RegisterState& b) {
  std::vector<int> dims = a.dims;
  dims.insert(dims.end(), b.dims.begin(), b.dims.end());
  return RegisterState{std::move(dims), kron(a.dm, b.dm)};
}

RegisterState apply_unitary(const RegisterState& r, const Mat& u) {
  if (u.rows() != r.dm.rows())
    throw DimensionMismatch("unitary does not match the register");
  check_unitary(u);
  return RegisterState{r.dims, u * r.dm * u.adjoint()};
}

RegisterState postselect(const RegisterState& r, int subsystem, int outcome) {
  if (subsystem < 0 || subsystem >= static_cast<int>(r.dims.size()))
    throw DimensionMismatch("no such subsystem");
  if (outcome < 0 || outcome >= r.dims[subsystem])
    throw ConfigError("outcome exceeds the subsystem dimension");
  int before = 1, after = 1;
  for (int i = 0; i < subsystem; ++i) before *= r.dims[i];
  for (int i = subsystem + 1; i < static_cast<int>(r.dims.size()); ++i)
    after *= r.dims[i];
  Mat pk = Mat::Zero(r.dims[subsystem], r.dims[subsystem]);
  pk(outcome, outcome) = 1.0;
  Mat proj = kron(kron(ident(before), pk), ident(after));
  return RegisterState{r.dims, proj * r.dm * proj};
}

RegisterState marginal(const RegisterState& r, const std::vector<int>& keep) {
  std::vector<int> dims;
  dims.reserve(keep.size());
  for (int k : keep) {
    if (k < 0 || k >= static_cast<int>(r.dims.size()))
      throw DimensionMismatch("no such subsystem");
    dims.push_back(r.dims[k]);
  }
  return RegisterState{std::move(dims), partial_trace_keep(r.dm, r.dims, keep)};
}

Mat hadamard() {
  Mat h(2, 2);
  Real s = 1.0 / std::sqrt(2.0);
  h << s, s, s, -s;
  return h;
}

Mat unbalanced_hadamard(Real delta) {
  Mat h(2, 2);
  Real s = std::sin(delta), c = std::cos(delta);
  h << s, c, c, -s;
  return h;
}

Mat phase_shift(Real phi) {
  Mat p = Mat::Zero(2, 2);
  p(0, 0) = 1.0;
  p(1, 1) = std::exp(Cplx(0.0, phi));
  return p;
}

Mat swap_matrix(int d) {
  if (d < 2) throw DimensionMismatch("swap needs dimension >= 2");
  Mat s = Mat::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s(i * d + j, j * d + i) = 1.0;
  return s;
}

Mat controlled_unitary(const Mat& u, int control_level) {
  check_unitary(u);
  if (control_level != 0 && control_level != 1)
    throw ConfigError("control level must be 0 or 1");
  int n = static_cast<int>(u.rows());
  Mat cu = Mat::Zero(2 * n, 2 * n);
  cu.block(0, 0, n, n) = control_level == 0 ? u : Mat(ident(n));
  cu.block(n, n, n, n) = control_level == 0 ? Mat(ident(n)) : u;
  return cu;
}

Mat controlled_swap_gate(const std::vector<int>& dims, int i, int j) {
  if (dims.empty() || dims[0] != 2)
    throw DimensionMismatch("slot 0 must hold the control qubit");
  int n = static_cast<int>(dims.size());
  if (i < 1 || i >= n || j < 1 || j >= n || i == j)
    throw DimensionMismatch("swap targets must be distinct non-control slots");
  if (dims[i] != dims[j])
    throw DimensionMismatch("swapped subsystems must share a dimension");
  int nd = total_dim(dims);
  Mat g = Mat::Zero(nd, nd);
  for (int f = 0; f < nd; ++f) {
    std::vector<int> dig = digits_of(f, dims);
    if (dig[0] == 0) std::swap(dig[i], dig[j]);
    g(flat_of(dig, dims), f) = 1.0;
  }
  return g;
}

Mat coupling_unitary(Cplx lam) {
  Real a2 = std::norm(lam);
  if (a2 > 1.0 + 1e-12)
    throw ConfigError("a unitary expectation cannot exceed the unit disk");
  Real s = std::sqrt(std::max<Real>(0.0, 1.0 - a2));
  Mat u(2, 2);
  u << lam, Cplx(-s), Cplx(s), std::conj(lam);
  return u;
}

Cplx term_coupling(const ProtocolTerm& t) {
  return t.scale * (t.u * t.gamma).trace();
}

RegisterState prepare_psi_lambda(const RegisterState& gamma, const Mat& u,
                                 Real delta, bool conjugate) {
  int d = static_cast<int>(gamma.dm.rows());
  if (u.rows() != d) throw DimensionMismatch("coupling unitary does not match gamma");
  check_unitary(u);
  Mat ueff = conjugate ? Mat(u.adjoint()) : u;

  // One arm carries the coupling unitary, the other a quarter-wave
  // shift; the closing beam splitter interferes them so the control's
  // off-diagonal reads off Tr[U gamma].
  Mat joint = kron(projector(Vec::Unit(2, 0)), gamma.dm);
  Mat v = kron(hadamard(), ident(d)) * controlled_unitary(ueff, 0) *
          kron(phase_shift(0.5 * std::numbers::pi_v<Real>), ident(d)) *
          kron(unbalanced_hadamard(delta), ident(d));
  Mat out = v * joint * v.adjoint();
  return RegisterState{{2}, partial_trace(out, {2, d}, 0)};
}

RegisterState dme_halfstep(const RegisterState& psi_ctrl, const Mat& rho,
                           const Mat& rho_p, const Mat& sigma) {
  if (psi_ctrl.dims != std::vector<int>{2})
    throw DimensionMismatch("control must be a single qubit");
  int d = static_cast<int>(rho.rows());
  validate_density(rho);
  check_operator(rho_p, d, "factor states must share the simulator dimension");
  validate_density(rho_p);
  check_operator(sigma, d, "simulator state must match the factor dimension");

  std::vector<int> dims{2, d, d, d};
  Mat joint = kron(psi_ctrl.dm, kron(rho, kron(rho_p, sigma)));
  Mat hc = kron(hadamard(), ident(d * d * d));
  // the control was prepared in the +/- frame; rotating it puts the
  // first-order branch on the level that fires the swaps
  Mat g = controlled_swap_gate(dims, 1, 3) * controlled_swap_gate(dims, 2, 3);
  Mat v = hc * g * hc;
  RegisterState full{dims, v * joint * v.adjoint()};
  RegisterState branch = postselect(full, 0, 0);
  // the even split of the closing beam splitter costs a deterministic
  // factor 1/2; compensating it leaves only the generator's own trace
  // defect in the marginal
  Mat out = 2.0 * partial_trace_keep(branch.dm, dims, {3});
  return RegisterState{{d}, out};
}

RegisterState monomial_step(const ProtocolTerm& term, const Mat& rho,
                            const Mat& rho_p, const Mat& sigma, Real delta) {
  validate_density(term.gamma);
  RegisterState greg{{static_cast<int>(term.gamma.rows())}, term.gamma};
  Real eff = delta * term.scale;
  RegisterState fwd = prepare_psi_lambda(greg, term.u, eff, false);
  RegisterState half = dme_halfstep(fwd, rho, rho_p, sigma);
  RegisterState bwd = prepare_psi_lambda(greg, term.u, eff, true);
  return dme_halfstep(bwd, rho_p, rho, half.dm);
}

TrotterResult trotter_simulate(const ProtocolSpec& p, const Mat& sigma0,
                               const HistorySupplier& supply) {
  if (p.dim < 2) throw ConfigError("simulator dimension must be >= 2");
  if (p.terms.empty()) throw ConfigError("protocol needs at least one coupling");
  if (!(p.delta > 0.0)) throw ConfigError("step angle must be positive");
  if (p.steps < 1) throw ConfigError("step count must be >= 1");
  std::uint64_t work =
      static_cast<std::uint64_t>(p.steps) * p.terms.size();
  if (work > kStepBudget)
    throw StepBudgetExceeded("protocol exceeds the step budget");
  Real maxlam = 0.0;
  for (const ProtocolTerm& t : p.terms)
    maxlam = std::max(maxlam, std::abs(term_coupling(t)));
  if (p.delta * maxlam > kMaxStepAngle + 1e-12)
    throw ConfigError("step angle leaves the protocol's linear regime");
  validate_density(sigma0);
  if (sigma0.rows() != p.dim)
    throw DimensionMismatch("initial state does not match the simulator dimension");

  Mat sigma = sigma0;
  for (int k = 0; k < p.steps; ++k) {
    for (std::size_t j = 0; j < p.terms.size(); ++j) {
      auto [rho, rho_p] = supply(k, static_cast<int>(j), sigma);
      sigma = monomial_step(p.terms[j], rho, rho_p, sigma, p.delta).dm;
      Real tr = sigma.trace().real();
      if (!(tr > 0.0))
        throw InvalidState("postselection annihilated the simulator state");
      // heralding weight, not dynamical error; folded out each step
      sigma /= tr;
      // the exact branch is Hermitian; without this projection the
      // feedback of sigma into the factor slots amplifies roundoff skew
      sigma = 0.5 * (sigma + sigma.adjoint()).eval();
    }
  }
  Real t_total = p.steps * p.delta;
  Real bound = kTrotterC * static_cast<Real>(p.terms.size()) * t_total *
               t_total / static_cast<Real>(p.steps);
  return TrotterResult{sigma, bound};
}

SplitHamiltonian split_hamiltonian(const Mat& h) {
  if (h.rows() != h.cols()) throw DimensionMismatch("hamiltonian must be square");
  if (herm_residual(h) > kHermTol)
    throw NonHermitianHamiltonian("split needs a Hermitian operator");
  int d = static_cast<int>(h.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Real scale = es.eigenvalues().cwiseAbs().maxCoeff();
  if (scale <= 1e-14) throw ZeroOperator("cannot split the zero operator");
  Real thr = 1e-12 * scale;
  Mat plus = Mat::Zero(d, d), minus = Mat::Zero(d, d);
  Real tp = 0.0, tm = 0.0;
  for (int i = 0; i < d; ++i) {
    Real ev = es.eigenvalues()(i);
    Mat pr = projector(es.eigenvectors().col(i));
    if (ev > thr) {
      plus += ev * pr;
      tp += ev;
    } else if (ev < -thr) {
      minus += -ev * pr;
      tm += -ev;
    }
  }
  SplitHamiltonian s;
  s.trace_plus = tp;
  s.trace_minus = tm;
  s.rho_plus = tp > 0.0 ? Mat(plus / tp) : Mat(Mat::Zero(d, d));
  s.rho_minus = tm > 0.0 ? Mat(minus / tm) : Mat(Mat::Zero(d, d));
  return s;
}

Mat dme_exponentiate(const Mat& rho_gen, const Mat& sigma, Real t, int n,
                     int direction) {
  validate_density(rho_gen);
  int d = static_cast<int>(rho_gen.rows());
  check_operator(sigma, d, "simulator state must match the generator dimension");
  if (n < 1) throw ConfigError("pass count must be >= 1");
  if (direction != 1 && direction != -1)
    throw ConfigError("direction must be +1 or -1");
  if (!(t >= 0.0)) throw ConfigError("time must be nonnegative");
  if (t == 0.0) return sigma;

  Real delta = t / static_cast<Real>(n);
  Mat u = std::cos(delta) * ident(d * d) -
          Cplx(0.0, direction * std::sin(delta)) * swap_matrix(d);
  Mat s = sigma;
  for (int k = 0; k < n; ++k) {
    Mat joint = u * kron(rho_gen, s) * u.adjoint();
    s = partial_trace(joint, {d, d}, 1);
  }
  return s;
}

Mat general_protocol_step(const Mat& h, const Mat& rho, Real dt, int n_plus,
                          int n_minus) {
  if (!(dt >= 0.0)) throw ConfigError("time step must be nonnegative");
  SplitHamiltonian sp = split_hamiltonian(h);
  Mat s = rho;
  if (sp.trace_plus > 0.0)
    s = dme_exponentiate(sp.rho_plus, s, dt * sp.trace_plus, n_plus, 1);
  if (sp.trace_minus > 0.0)
    s = dme_exponentiate(sp.rho_minus, s, dt * sp.trace_minus, n_minus, -1);
  return s;
}

Mat noisy_hamiltonian(const Mat& h, std::uint64_t shots, std::uint64_t seed) {
  if (h.rows() != h.cols()) throw DimensionMismatch("hamiltonian must be square");
  if (herm_residual(h) > kHermTol)
    throw NonHermitianHamiltonian("noise model needs a Hermitian operator");
  if (shots < 1) throw ConfigError("shot count must be >= 1");
  int d = static_cast<int>(h.rows());
  Real scale = h.cwiseAbs().maxCoeff();
  Real sd = scale / std::sqrt(static_cast<Real>(shots));
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  Mat out = h;
  for (int i = 0; i < d; ++i) {
    out(i, i) += sd * gauss(rng);
    for (int j = i + 1; j < d; ++j) {
      Cplx z = sd * Cplx(gauss(rng), gauss(rng)) / std::sqrt(2.0);
      out(i, j) += z;
      out(j, i) += std::conj(z);
    }
  }
  return out;
}

ResourceEstimate resource_estimate(int monomials, int history_points,
                                   int factor_degree, Real t, Real epsilon) {
  if (monomials < 1 || history_points < 1 || factor_degree < 1)
    throw ConfigError("resource counts must be positive");
  if (!(t > 0.0) || !(epsilon > 0.0))
    throw ConfigError("horizon and target error must be positive");
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();

  ResourceEstimate r;
  std::uint64_t m = static_cast<std::uint64_t>(monomials);
  std::uint64_t span = static_cast<std::uint64_t>(history_points + factor_degree);
  r.systems_per_step = 2 * m * (span + 1);
  Real steps = std::ceil(static_cast<Real>(monomials) * t * t / epsilon);
  r.trotter_steps =
      steps >= static_cast<Real>(kMax)
          ? kMax
          : std::max<std::uint64_t>(1, static_cast<std::uint64_t>(steps));
  std::uint64_t alpha = 2 * m * span;
  std::uint64_t copies = 1;
  for (std::uint64_t i = 0; i < r.trotter_steps; ++i) {
    if (copies > kMax / alpha) {
      copies = kMax;
      break;
    }
    copies *= alpha;
  }
  r.total_copies = copies;
  r.simulator_dimension_exponent = copies;
  return r;
}

}  // namespace ecqt
