#include "ecqt/echam.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ecqt/errors.hpp"
#include "ecqt/reform.hpp"

namespace ecqt {

namespace {

Mat matrix_power(const Mat& a, int n) {
  Mat out = a;
  for (int i = 1; i < n; ++i) out = out * a;
  return out;
}

// One delayed-state factor: optional slot restriction, power, transpose.
Mat factor_matrix(const MonomialFactor& f, const HistoryView& view, int dim) {
  if (f.power < 1) throw ConfigError("factor power must be at least 1");
  Mat rho = view.delayed(f.a);
  if (rho.rows() != dim || rho.cols() != dim)
    throw DimensionMismatch("delayed state does not match the declared dimension");
  Mat out;
  if (f.subsystem) {
    const SubState& ss = *f.subsystem;
    long long prod = 1;
    for (int d : ss.dims) {
      if (d < 1) throw DimensionMismatch("tensor slots must have positive dimension");
      prod *= d;
    }
    if (prod != dim || ss.keep < 0 || ss.keep >= int(ss.dims.size()))
      throw DimensionMismatch("tensor slots do not factor the state dimension");
    Mat sub = matrix_power(partial_trace(rho, ss.dims, ss.keep), f.power);
    int before = 1;
    int after = 1;
    for (int i = 0; i < ss.keep; ++i) before *= ss.dims[i];
    for (int i = ss.keep + 1; i < int(ss.dims.size()); ++i) after *= ss.dims[i];
    out = kron(kron(ident(before), sub), ident(after));
  } else {
    out = matrix_power(rho, f.power);
  }
  if (f.transpose) out = out.transpose().eval();
  return out;
}

// S0 * F1 * S1 * ... * Fn * Sn with identity sandwiches when the list is
// empty.
Mat bare_product(const MonomialTerm& term, const HistoryView& view, int dim) {
  if (term.factors.empty())
    throw ConfigError("monomial needs at least one state factor");
  const bool sw = !term.sandwiches.empty();
  if (sw && term.sandwiches.size() != term.factors.size() + 1)
    throw ConfigError("sandwich list must have one more entry than factors");
  Mat m;
  if (sw) {
    if (term.sandwiches[0].rows() != dim || term.sandwiches[0].cols() != dim)
      throw DimensionMismatch("sandwich operator does not match the state dimension");
    m = term.sandwiches[0];
  } else {
    m = ident(dim);
  }
  for (std::size_t i = 0; i < term.factors.size(); ++i) {
    m = m * factor_matrix(term.factors[i], view, dim);
    if (sw) {
      const Mat& s = term.sandwiches[i + 1];
      if (s.rows() != dim || s.cols() != dim)
        throw DimensionMismatch("sandwich operator does not match the state dimension");
      m = m * s;
    }
  }
  return m;
}

// Single state factors are Hermitian whatever the power, slot restriction
// or transpose; their product stays Hermitian exactly when the sandwich
// pair preserves Hermiticity. Probing with a fixed generic Hermitian
// matrix keeps the decision independent of the trajectory.
bool hermitian_content(const MonomialTerm& term, int dim) {
  if (term.factors.size() != 1) return false;
  if (term.sandwiches.empty()) return true;
  Mat probe(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      probe(i, j) = Cplx(1.0 / (1.0 + i + j), 0.1 * (i - j));
  Mat wrapped = term.sandwiches[0] * probe * term.sandwiches[1];
  Real scale = std::max(Real(1.0), wrapped.cwiseAbs().maxCoeff());
  return herm_residual(wrapped) <= 1e-10 * scale;
}

Real builtin_param(const CouplingSchedule& s, const char* key) {
  auto it = s.params.find(key);
  if (it == s.params.end())
    throw ConfigError("builtin coupling '" + s.builtin + "' missing parameter '" +
                      key + "'");
  return it->second;
}

Real builtin_param_or(const CouplingSchedule& s, const char* key, Real fallback) {
  auto it = s.params.find(key);
  return it == s.params.end() ? fallback : it->second;
}

int ground_index_of(const CouplingSchedule& s, const Mat& rho) {
  int g = int(std::lround(builtin_param_or(s, "ground_index", 0.0)));
  if (g < 0 || g >= rho.rows())
    throw ConfigError("ground_index outside the state dimension");
  return g;
}

Real builtin_value(const CouplingSchedule& s, const HistoryView& view) {
  const std::string& name = s.builtin;
  if (name == "F" || name == "one_minus_F") {
    Real a = builtin_param(s, "a");
    Real f = (view.delayed(a) * view.delayed(0.0)).trace().real();
    return name == "F" ? f : 1.0 - f;
  }
  if (name == "lco_lambda_t" || name == "lco_lambda_tma" ||
      name == "lco_lambda_R" || name == "lco_lambda_I") {
    Real a = builtin_param(s, "a");
    if (s.target_h.size() == 0)
      throw ConfigError("coupling-recovery builtin needs a target Hamiltonian");
    QubitECCouplings c =
        ec_couplings_one_qubit(s.target_h, view.delayed(0.0), view.delayed(a));
    if (name == "lco_lambda_t") return c.lambda_t;
    if (name == "lco_lambda_tma") return c.lambda_tma;
    if (name == "lco_lambda_R") return c.lambda_R;
    return c.lambda_I;
  }
  if (name == "crh_lambda_bar_R" || name == "crh_lambda_I") {
    TimeIndependentCouplings c = ec_couplings_time_independent(
        builtin_param(s, "e1"), builtin_param(s, "e2"), builtin_param(s, "s0"),
        builtin_param(s, "a"));
    return name == "crh_lambda_bar_R" ? c.lambda_bar_R : c.lambda_I;
  }
  if (name == "catb_eta") {
    Real xi = builtin_param(s, "xi");
    Real de = builtin_param(s, "delta_e");
    if (xi == 0.0) throw ZeroXi("energy-pump schedule needs a nonzero deformation");
    if (!(de > 0.0)) throw ConfigError("level gap must be positive");
    Mat rho = view.delayed(0.0);
    Real p = rho(ground_index_of(s, rho), ground_index_of(s, rho)).real();
    // freeze once the excited population is exhausted
    Real pq = std::max(p * (1.0 - p), 1e-4 * (1.0 - 1e-4));
    return (1.0 + xi * xi) / (de * de * pq);
  }
  if (name == "catb_lambda") {
    Real xi = builtin_param(s, "xi");
    if (xi == 0.0) throw ZeroXi("energy-pump schedule needs a nonzero deformation");
    return -std::abs(xi);
  }
  if (name == "cata_lambda") {
    Real xi = builtin_param(s, "xi");
    Real de = builtin_param(s, "delta_e");
    if (xi == 0.0) throw ZeroXi("energy-pump schedule needs a nonzero deformation");
    if (!(de > 0.0)) throw ConfigError("level gap must be positive");
    Mat rho = view.delayed(0.0);
    Real p = rho(ground_index_of(s, rho), ground_index_of(s, rho)).real();
    Real b = de * de * p * (1.0 - p);
    Real disc = b * b - 4.0 * xi * xi;
    if (disc < 0.0)
      throw ScheduleSingularity("pump coupling root went complex");
    // branch that vanishes with the deformation strength
    return (b - std::sqrt(disc)) / (2.0 * xi);
  }
  throw ConfigError("unknown builtin coupling '" + name + "'");
}

struct BuiltinInfo {
  std::vector<std::string> required;
  bool needs_target = false;
};

const std::map<std::string, BuiltinInfo>& builtin_registry() {
  static const std::map<std::string, BuiltinInfo> reg = {
      {"F", {{"a"}, false}},
      {"one_minus_F", {{"a"}, false}},
      {"lco_lambda_t", {{"a"}, true}},
      {"lco_lambda_tma", {{"a"}, true}},
      {"lco_lambda_R", {{"a"}, true}},
      {"lco_lambda_I", {{"a"}, true}},
      {"crh_lambda_bar_R", {{"e1", "e2", "s0", "a"}, false}},
      {"crh_lambda_I", {{"e1", "e2", "s0", "a"}, false}},
      {"catb_eta", {{"xi", "delta_e"}, false}},
      {"catb_lambda", {{"xi"}, false}},
      {"cata_lambda", {{"xi", "delta_e"}, false}},
  };
  return reg;
}

}  // namespace

CouplingSchedule CouplingSchedule::constant_value(Real v) {
  CouplingSchedule s;
  s.kind = Kind::Constant;
  s.constant = v;
  return s;
}

CouplingSchedule CouplingSchedule::table_series(Real t0, Real dt,
                                                std::vector<Real> v) {
  CouplingSchedule s;
  s.kind = Kind::Table;
  s.table_t0 = t0;
  s.table_dt = dt;
  s.table = std::move(v);
  return s;
}

CouplingSchedule CouplingSchedule::builtin_fn(std::string name,
                                              std::map<std::string, Real> params,
                                              Mat target) {
  CouplingSchedule s;
  s.kind = Kind::Builtin;
  s.builtin = std::move(name);
  s.params = std::move(params);
  s.target_h = std::move(target);
  return s;
}

Real CouplingSchedule::value(const HistoryView& view) const {
  Real v = 0.0;
  switch (kind) {
    case Kind::Constant:
      v = constant;
      break;
    case Kind::Table: {
      if (table.empty() || !(table_dt > 0.0))
        throw ConfigError("table coupling needs samples and a positive step");
      Real x = (view.t - table_t0) / table_dt;
      long idx = std::lround(x);
      Real snapped = table_t0 + Real(idx) * table_dt;
      if (idx < 0 || idx >= long(table.size()) ||
          std::abs(view.t - snapped) > kGridTol)
        throw OffGridTime("schedule table does not cover this time");
      v = table[std::size_t(idx)];
      break;
    }
    case Kind::Builtin:
      v = builtin_value(*this, view);
      break;
  }
  if (!std::isfinite(v)) throw NonFiniteCoupling("coupling evaluated nonfinite");
  return v;
}

Real ECHamiltonianSpec::a_max() const {
  Real m = 0.0;
  for (const TermEntry& e : terms)
    for (const MonomialFactor& f : e.term.factors) m = std::max(m, f.a);
  return m;
}

int ECHamiltonianSpec::history_states() const {
  std::vector<Real> ds;
  for (const TermEntry& e : terms)
    for (const MonomialFactor& f : e.term.factors) ds.push_back(f.a);
  std::sort(ds.begin(), ds.end());
  int n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (i == 0 || ds[i] - ds[i - 1] > 1e-12) ++n;
  return n;
}

int ECHamiltonianSpec::max_monomial_length() const {
  int m = 0;
  for (const TermEntry& e : terms) {
    int len = 0;
    for (const MonomialFactor& f : e.term.factors) len += f.power;
    m = std::max(m, len);
  }
  return m;
}

void ECHamiltonianSpec::validate() const {
  if (dim < 1) throw ConfigError("state dimension must be positive");
  if (sqt_part.size() != 0) {
    if (sqt_part.rows() != dim || sqt_part.cols() != dim)
      throw DimensionMismatch("state-independent part does not match the dimension");
    if (!sqt_part.allFinite())
      throw ConfigError("state-independent part has nonfinite entries");
    if (!is_hermitian(sqt_part, 1e-8))
      throw NonHermitianHamiltonian("state-independent part must be Hermitian");
  }
  for (const TermEntry& e : terms) {
    const MonomialTerm& t = e.term;
    if (t.factors.empty())
      throw ConfigError("monomial needs at least one state factor");
    if (!t.sandwiches.empty() && t.sandwiches.size() != t.factors.size() + 1)
      throw ConfigError("sandwich list must have one more entry than factors");
    for (const Mat& s : t.sandwiches) {
      if (s.rows() != dim || s.cols() != dim)
        throw DimensionMismatch("sandwich operator does not match the state dimension");
      if (!s.allFinite()) throw ConfigError("sandwich operator has nonfinite entries");
    }
    for (const MonomialFactor& f : t.factors) {
      if (f.power < 1) throw ConfigError("factor power must be at least 1");
      if (!std::isfinite(f.a) || f.a < 0.0)
        throw ConfigError("memory distance must be a nonnegative real");
      if (f.subsystem) {
        long long prod = 1;
        for (int d : f.subsystem->dims) {
          if (d < 1)
            throw DimensionMismatch("tensor slots must have positive dimension");
          prod *= d;
        }
        if (prod != dim || f.subsystem->keep < 0 ||
            f.subsystem->keep >= int(f.subsystem->dims.size()))
          throw DimensionMismatch("tensor slots do not factor the state dimension");
      }
    }
    const CouplingSchedule& c = e.coupling;
    switch (c.kind) {
      case CouplingSchedule::Kind::Constant:
        if (!std::isfinite(c.constant))
          throw NonFiniteCoupling("constant coupling is not finite");
        break;
      case CouplingSchedule::Kind::Table: {
        if (c.table.empty() || !(c.table_dt > 0.0))
          throw ConfigError("table coupling needs samples and a positive step");
        for (Real v : c.table)
          if (!std::isfinite(v))
            throw NonFiniteCoupling("table coupling has nonfinite entries");
        break;
      }
      case CouplingSchedule::Kind::Builtin: {
        auto it = builtin_registry().find(c.builtin);
        if (it == builtin_registry().end())
          throw ConfigError("unknown builtin coupling '" + c.builtin + "'");
        for (const std::string& key : it->second.required)
          if (c.params.find(key) == c.params.end())
            throw ConfigError("builtin coupling '" + c.builtin +
                              "' missing parameter '" + key + "'");
        if (it->second.needs_target) {
          if (c.target_h.size() == 0)
            throw ConfigError("coupling-recovery builtin needs a target Hamiltonian");
          if (!is_hermitian(c.target_h, 1e-8))
            throw NonHermitianHamiltonian("target Hamiltonian must be Hermitian");
        }
        break;
      }
    }
  }
}

HistoryView view_of(const StateHistory& history, Real t) {
  HistoryView v;
  v.t = t;
  v.delayed = [&history, t](Real a) -> Mat {
    if (!std::isfinite(a) || a < -kGridTol)
      throw OffGridDistance("memory distance must be nonnegative");
    Real ta = t - a;
    if (ta < history.t0() - kGridTol)
      throw MemoryUnderflow("delayed state predates the recorded history");
    if (!history.on_grid(ta))
      throw OffGridDistance("delayed time does not land on the history grid");
    return history.rho_at(ta);
  };
  return v;
}

Mat eval_monomial_raw(const MonomialTerm& term, const HistoryView& view,
                      int dim) {
  Mat m = bare_product(term, view, dim);
  if (term.parity == Parity::Plus) return Mat(m + m.adjoint());
  return Mat(m - m.adjoint());
}

Mat eval_monomial(const MonomialTerm& term, const StateHistory& history,
                  Real t) {
  return eval_monomial_raw(term, view_of(history, t), history.dim());
}

Mat term_contribution(const MonomialTerm& term, const HistoryView& view,
                      int dim) {
  Mat m = bare_product(term, view, dim);
  if (hermitian_content(term, dim)) return m;
  if (term.parity == Parity::Plus) return Mat(m + m.adjoint());
  return Mat(Cplx(0.0, 1.0) * (m - m.adjoint()));
}

Mat assemble(const ECHamiltonianSpec& spec, const HistoryView& view) {
  Mat h;
  if (spec.sqt_part.size() != 0) {
    if (spec.sqt_part.rows() != spec.dim || spec.sqt_part.cols() != spec.dim)
      throw DimensionMismatch("state-independent part does not match the dimension");
    h = spec.sqt_part;
  } else {
    h = Mat::Zero(spec.dim, spec.dim);
  }
  for (const TermEntry& e : spec.terms) {
    Real lam = e.coupling.value(view);
    // exact zeros contribute nothing and must leave the sum bit-identical
    if (lam == 0.0) continue;
    h += lam * term_contribution(e.term, view, spec.dim);
  }
  return h;
}

Mat assemble(const ECHamiltonianSpec& spec, const StateHistory& history,
             Real t) {
  if (history.dim() != spec.dim)
    throw DimensionMismatch("history does not match the declared dimension");
  return assemble(spec, view_of(history, t));
}

Mat gross_pitaevskii(const Vec& psi, const std::vector<Mat>& projectors) {
  validate_pure(psi);
  int d = int(psi.size());
  if (int(projectors.size()) != d)
    throw IncompleteBasis("need one rank-1 projector per basis direction");
  Mat sum = Mat::Zero(d, d);
  for (const Mat& p : projectors) {
    if (p.rows() != d || p.cols() != d)
      throw DimensionMismatch("projector does not match the state dimension");
    if (herm_residual(p) > 1e-8 ||
        std::abs(p.trace().real() - 1.0) > 1e-8 ||
        (p * p - p).cwiseAbs().maxCoeff() > 1e-8)
      throw IncompleteBasis("each operator must be a rank-1 projector");
    sum += p;
  }
  if ((sum - ident(d)).cwiseAbs().maxCoeff() > 1e-8)
    throw IncompleteBasis("projectors must resolve the identity");
  Mat h = Mat::Zero(d, d);
  for (const Mat& p : projectors) {
    Real amp = psi.dot(p * psi).real();
    h += amp * p;
  }
  return h;
}

Real isometry_residual(const Mat& h, const Mat& rho) {
  if (h.rows() != h.cols() || h.rows() != rho.rows() || rho.rows() != rho.cols())
    throw DimensionMismatch("generator and state must be square and matched");
  Mat anti = h - h.adjoint().eval();
  return std::abs((rho * anti).trace());
}

}  // namespace ecqt
