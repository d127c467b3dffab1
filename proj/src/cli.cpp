#include "ecqt/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "ecqt/circuit.hpp"
#include "ecqt/deform.hpp"
#include "ecqt/errors.hpp"
#include "ecqt/reform.hpp"
#include "ecqt/serialize.hpp"

namespace ecqt {

namespace {

using nlohmann::json;

const json& need(const json& j, const std::string& key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string(where) + "." + key + " is required");
  return j.at(key);
}

Real need_real(const json& j, const std::string& key, const char* where) {
  const json& v = need(j, key, where);
  if (!v.is_number())
    throw ConfigError(std::string(where) + "." + key + " must be a number");
  return v.get<Real>();
}

int need_int(const json& j, const std::string& key, const char* where) {
  const json& v = need(j, key, where);
  if (!v.is_number_integer())
    throw ConfigError(std::string(where) + "." + key + " must be an integer");
  return v.get<int>();
}

Real opt_real(const json& j, const std::string& key, Real fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw ConfigError(key + " must be a number");
  return j.at(key).get<Real>();
}

void check_on_grid(Real a, Real dt, const char* what) {
  Real steps = a / dt;
  if (std::abs(steps - std::round(steps)) > kGridTol * std::max<Real>(1.0, steps))
    throw ConfigError(std::string(what) +
                      " must be an integer multiple of integrator.dt");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

json provenance(const RunConfig& cfg) {
  json p;
  p["code_version"] = kCliVersion;
  p["config_digest"] = cfg.config_digest;
  p["seed"] = cfg.seed;
  p["units"] = cfg.units;
  p["verb"] = cfg.verb;
  return p;
}

json real_list(const std::vector<Real>& v) {
  json a = json::array();
  for (Real x : v) a.push_back(x);
  return a;
}

json features_json(const PhaseFeatures& f) {
  json j;
  j["f_mean"] = f.f_mean;
  j["f_var"] = f.f_var;
  j["f_amp"] = f.f_amp;
  j["pop_amp"] = f.pop_amp;
  j["f_freq_frac"] = f.f_freq_frac;
  j["pop_freq_frac"] = f.pop_freq_frac;
  j["spectral_entropy"] = f.spectral_entropy;
  j["plateau_frac"] = f.plateau_frac;
  j["swap_count"] = f.swap_count;
  j["swap_spacing_mean"] = f.swap_spacing_mean;
  j["swap_spacing_rel_std"] = f.swap_spacing_rel_std;
  j["module_score"] = f.module_score;
  return j;
}

const char* const kFeatureColumns[] = {
    "f_mean",           "f_var",
    "f_amp",            "pop_amp",
    "f_freq_frac",      "pop_freq_frac",
    "spectral_entropy", "plateau_frac",
    "swap_count",       "swap_spacing_mean",
    "swap_spacing_rel_std", "module_score"};

void append_feature_row(std::ostringstream& os, const PhaseFeatures& f) {
  os << ',' << format_real(f.f_mean) << ',' << format_real(f.f_var) << ','
     << format_real(f.f_amp) << ',' << format_real(f.pop_amp) << ','
     << format_real(f.f_freq_frac) << ',' << format_real(f.pop_freq_frac)
     << ',' << format_real(f.spectral_entropy) << ','
     << format_real(f.plateau_frac) << ',' << f.swap_count << ','
     << format_real(f.swap_spacing_mean) << ','
     << format_real(f.swap_spacing_rel_std) << ','
     << format_real(f.module_score);
}

struct SimulateInputs {
  ECHamiltonianSpec spec;
  Mat kicker;
  Mat rho0;
  IntegratorConfig icfg;
};

Mat rho0_from_json(const json& j) {
  if (j.is_object() && j.contains("pure")) return projector(config_vector(j.at("pure")));
  if (j.is_object() && j.contains("matrix")) return config_matrix(j.at("matrix"));
  throw ConfigError("rho0 must carry either a \"pure\" vector or a \"matrix\"");
}

SimulateInputs load_simulate(const RunConfig& cfg) {
  const json& c = cfg.config;
  SimulateInputs in;
  in.spec = spec_from_json(need(c, "spec", "config"));
  in.kicker = config_matrix(need(c, "kicker", "config"));
  in.rho0 = rho0_from_json(need(c, "rho0", "config"));
  in.icfg = integrator_from_json(need(c, "integrator", "config"));
  for (const TermEntry& e : in.spec.terms)
    for (const MonomialFactor& f : e.term.factors)
      if (f.a > 0.0) check_on_grid(f.a, in.icfg.dt, "memory distance");
  if (in.spec.a_max() > in.icfg.horizon)
    throw ConfigError("integrator.horizon must cover the largest memory distance");
  return in;
}

void write_trajectory(const RunConfig& cfg, const Trajectory& traj,
                      Real a_ref) {
  switch (cfg.format) {
    case OutputFormat::Csv:
      write_file(out_path(cfg, "trajectory.csv"), trajectory_csv(traj, a_ref));
      break;
    case OutputFormat::Json: {
      json j;
      j["series_t0"] = traj.series_t0;
      j["series_dt"] = traj.series_dt;
      j["energies"] = real_list(traj.energies);
      json fs;
      for (const auto& kv : traj.fidelity_series)
        fs[format_real(kv.first)] = real_list(kv.second);
      j["fidelity_series"] = fs;
      j["history"] = history_to_json(traj.history);
      write_file(out_path(cfg, "trajectory.json"), j.dump(2) + "\n");
      break;
    }
    case OutputFormat::BinaryHistory:
      history_save_binary(traj.history, out_path(cfg, "history.bin"));
      break;
  }
}

void write_summary(const RunConfig& cfg, const Trajectory& traj) {
  json s = provenance(cfg);
  json fins;
  for (const auto& kv : traj.fidelity_series)
    if (!kv.second.empty()) fins[format_real(kv.first)] = kv.second.back();
  s["final_fidelity"] = fins;
  if (!traj.energies.empty()) {
    auto [mn, mx] = std::minmax_element(traj.energies.begin(), traj.energies.end());
    s["energy_min"] = *mn;
    s["energy_max"] = *mx;
  }
  s["max_purity_drift"] = traj.max_purity_drift;
  s["max_herm_residual"] = traj.max_herm_residual;
  write_file(out_path(cfg, "summary.json"), s.dump(2) + "\n");
}

// unitary family e^{-iKt} of a Hermitian kicker, via its spectrum
struct KickerFlow {
  Eigen::SelfAdjointEigenSolver<Mat> es;
  Mat rho0;

  KickerFlow(const Mat& kicker, const Mat& rho0_in) : es(kicker), rho0(rho0_in) {
    if (herm_residual(kicker) > kHermTol)
      throw ConfigError("kicker must be Hermitian");
  }

  Mat at(Real t) const {
    Vec phases = (Cplx(0, -t) * es.eigenvalues().cast<Cplx>().array()).exp();
    Mat u = es.eigenvectors() * phases.asDiagonal() *
            es.eigenvectors().adjoint();
    return u * rho0 * u.adjoint();
  }
};

}  // namespace

nlohmann::json load_config_file(const std::string& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < bytes.size(); ++i) {
      if (bytes[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << "config parse error at line " << line << ", column " << col << ": "
        << e.what();
    throw ConfigError(msg.str());
  }
}

Mat config_matrix(const json& j) {
  try {
    return matrix_from_json(j);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed matrix: ") + e.what());
  }
}

Vec config_vector(const json& j) {
  if (!j.is_array() || j.empty())
    throw ConfigError("state vector must be a non-empty array of [re, im] pairs");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j.at(i);
    if (!e.is_array() || e.size() != 2 || !e.at(0).is_number() ||
        !e.at(1).is_number())
      throw ConfigError("state vector entries must be [re, im] pairs");
    v(static_cast<Eigen::Index>(i)) = Cplx(e.at(0).get<Real>(), e.at(1).get<Real>());
  }
  return v;
}

ECHamiltonianSpec spec_from_json(const json& j) {
  ECHamiltonianSpec spec;
  spec.dim = need_int(j, "dim", "spec");
  if (spec.dim < 2) throw ConfigError("spec.dim must be >= 2");
  if (j.contains("sqt")) spec.sqt_part = config_matrix(j.at("sqt"));
  const json& terms = need(j, "terms", "spec");
  if (!terms.is_array()) throw ConfigError("spec.terms must be an array");
  for (const json& tj : terms) {
    TermEntry entry;
    const json& parity = need(tj, "parity", "spec.terms[]");
    if (parity == "+")
      entry.term.parity = Parity::Plus;
    else if (parity == "-")
      entry.term.parity = Parity::Minus;
    else
      throw ConfigError("spec.terms[].parity must be \"+\" or \"-\"");

    const json& factors = need(tj, "factors", "spec.terms[]");
    if (!factors.is_array() || factors.empty())
      throw ConfigError("spec.terms[].factors must be a non-empty array");
    for (const json& fj : factors) {
      MonomialFactor f;
      f.a = need_real(fj, "a", "spec.terms[].factors[]");
      if (f.a < 0.0) throw ConfigError("memory distances must be >= 0");
      if (fj.contains("power")) {
        f.power = need_int(fj, "power", "spec.terms[].factors[]");
        if (f.power < 1) throw ConfigError("factor powers must be >= 1");
      }
      entry.term.factors.push_back(f);
    }

    const json& cj = need(tj, "coupling", "spec.terms[]");
    if (cj.is_number()) {
      entry.coupling = CouplingSchedule::constant_value(cj.get<Real>());
    } else if (cj.is_object() && cj.contains("constant")) {
      entry.coupling =
          CouplingSchedule::constant_value(need_real(cj, "constant", "coupling"));
    } else if (cj.is_object() && cj.contains("table")) {
      const json& tb = cj.at("table");
      const json& vals = need(tb, "values", "coupling.table");
      if (!vals.is_array() || vals.empty())
        throw ConfigError("coupling.table.values must be a non-empty array");
      std::vector<Real> series;
      for (const json& v : vals) {
        if (!v.is_number())
          throw ConfigError("coupling.table.values must hold numbers");
        series.push_back(v.get<Real>());
      }
      entry.coupling = CouplingSchedule::table_series(
          need_real(tb, "t0", "coupling.table"),
          need_real(tb, "dt", "coupling.table"), std::move(series));
    } else if (cj.is_object() && cj.contains("builtin")) {
      const json& bj = cj.at("builtin");
      const json& name = need(bj, "name", "coupling.builtin");
      if (!name.is_string())
        throw ConfigError("coupling.builtin.name must be a string");
      std::map<std::string, Real> params;
      if (bj.contains("params")) {
        const json& pj = bj.at("params");
        if (!pj.is_object())
          throw ConfigError("coupling.builtin.params must be an object");
        for (auto it = pj.begin(); it != pj.end(); ++it) {
          if (!it.value().is_number())
            throw ConfigError("coupling.builtin.params must hold numbers");
          params[it.key()] = it.value().get<Real>();
        }
      }
      Mat target;
      if (bj.contains("target")) target = config_matrix(bj.at("target"));
      entry.coupling = CouplingSchedule::builtin_fn(name.get<std::string>(),
                                                    std::move(params), target);
    } else {
      throw ConfigError(
          "coupling must be a number or carry constant/table/builtin");
    }
    spec.terms.push_back(std::move(entry));
  }
  spec.validate();
  return spec;
}

IntegratorConfig integrator_from_json(const json& j) {
  IntegratorConfig cfg;
  cfg.dt = need_real(j, "dt", "integrator");
  if (!(cfg.dt > 0.0)) throw ConfigError("integrator.dt must be positive");
  cfg.horizon = need_real(j, "horizon", "integrator");
  if (!(cfg.horizon > 0.0))
    throw ConfigError("integrator.horizon must be positive");
  if (j.contains("assembly")) {
    const json& a = j.at("assembly");
    if (a == "left")
      cfg.assembly = AssemblyRule::LeftEndpoint;
    else if (a == "midpoint")
      cfg.assembly = AssemblyRule::Midpoint;
    else
      throw ConfigError("integrator.assembly must be \"left\" or \"midpoint\"");
  }
  if (j.contains("unitarity")) {
    const json& u = j.at("unitarity");
    if (u == "monitor")
      cfg.unitarity_policy = UnitarityPolicy::MonitorOnly;
    else if (u == "renormalize")
      cfg.unitarity_policy = UnitarityPolicy::RenormalizeEachStep;
    else
      throw ConfigError(
          "integrator.unitarity must be \"monitor\" or \"renormalize\"");
  }
  if (j.contains("record_stride")) {
    cfg.record_stride = need_int(j, "record_stride", "integrator");
    if (cfg.record_stride < 1)
      throw ConfigError("integrator.record_stride must be >= 1");
  }
  return cfg;
}

std::string trajectory_csv(const Trajectory& traj, Real a_ref) {
  std::ostringstream os;
  const StateHistory& hist = traj.history;
  const int d = hist.dim();
  const bool tau = a_ref > 0.0;
  os << 't';
  if (tau) os << ",tau";
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      os << ",re_" << r << '_' << c << ",im_" << r << '_' << c;
  os << ",energy";
  for (const auto& kv : traj.fidelity_series)
    os << ",fidelity_a=" << format_real(kv.first);
  os << '\n';
  for (std::size_t i = 0; i < traj.energies.size(); ++i) {
    const Real t = traj.series_time(i);
    os << format_real(t);
    if (tau) os << ',' << format_real(t / a_ref);
    if (hist.on_grid(t)) {
      Mat rho = hist.rho_at(t);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          os << ',' << format_real(rho(r, c).real()) << ','
             << format_real(rho(r, c).imag());
    } else {
      for (int k = 0; k < 2 * d * d; ++k) os << ',';
    }
    os << ',' << format_real(traj.energies[i]);
    for (const auto& kv : traj.fidelity_series)
      os << ','
         << (i < kv.second.size() ? format_real(kv.second[i]) : std::string());
    os << '\n';
  }
  return os.str();
}

void run_simulate(const RunConfig& cfg) {
  SimulateInputs in = load_simulate(cfg);
  Trajectory traj = evolve(in.spec, in.kicker, in.rho0, in.icfg);
  write_trajectory(cfg, traj, in.spec.a_max());
  write_summary(cfg, traj);
}

SweepResult run_scan(const RunConfig& cfg) {
  SimulateInputs in = load_simulate(cfg);
  const json& sc = need(cfg.config, "scan", "config");
  const json& axes_j = need(sc, "axes", "scan");
  if (!axes_j.is_array() || axes_j.empty())
    throw ConfigError("scan.axes must be a non-empty array");

  SweepResult result;
  result.config_digest = cfg.config_digest;
  result.code_version = kCliVersion;
  for (const json& aj : axes_j) {
    SweepAxis axis;
    const json& name = need(aj, "name", "scan.axes[]");
    if (!name.is_string()) throw ConfigError("scan.axes[].name must be a string");
    axis.name = name.get<std::string>();
    const json& tj = need(aj, "term", "scan.axes[]");
    if (tj.is_string() && tj == "memory") {
      axis.term = -1;
    } else if (tj.is_number_integer()) {
      axis.term = tj.get<int>();
      if (axis.term < 0 || axis.term >= static_cast<int>(in.spec.terms.size()))
        throw ConfigError("scan.axes[].term is out of range");
    } else {
      throw ConfigError("scan.axes[].term must be an index or \"memory\"");
    }
    const json& vals = need(aj, "values", "scan.axes[]");
    if (!vals.is_array() || vals.empty())
      throw ConfigError("scan.axes[].values must be a non-empty array");
    for (const json& v : vals) {
      if (!v.is_number()) throw ConfigError("scan.axes[].values must hold numbers");
      Real x = v.get<Real>();
      if (axis.term == -1) {
        if (!(x > 0.0)) throw ConfigError("memory-axis values must be positive");
        check_on_grid(x, in.icfg.dt, "memory-axis value");
        if (x > in.icfg.horizon)
          throw ConfigError("memory-axis values must not exceed the horizon");
      }
      axis.values.push_back(x);
    }
    result.axes.push_back(std::move(axis));
  }

  std::size_t cells = 1;
  for (const SweepAxis& a : result.axes) cells *= a.values.size();
  const std::size_t budget =
      static_cast<std::size_t>(opt_real(sc, "cell_budget", 4096.0));
  if (cells > budget) throw BudgetExceeded("scan grid exceeds the cell budget");
  const Real lf = opt_real(sc, "late_fraction", 0.4);

  result.cells.resize(cells);
  std::atomic<std::size_t> next{0};
  std::mutex fail_mutex;
  std::exception_ptr failure;

  auto cell_worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells) return;
      try {
        ECHamiltonianSpec spec = in.spec;
        std::vector<Real> coords(result.axes.size());
        std::size_t rem = i;
        for (std::size_t k = result.axes.size(); k-- > 0;) {
          const SweepAxis& axis = result.axes[k];
          std::size_t idx = rem % axis.values.size();
          rem /= axis.values.size();
          Real v = axis.values[idx];
          coords[k] = v;
          if (axis.term >= 0) {
            spec.terms[static_cast<std::size_t>(axis.term)].coupling =
                CouplingSchedule::constant_value(v);
          } else {
            for (TermEntry& e : spec.terms)
              for (MonomialFactor& f : e.term.factors)
                if (f.a > 0.0) f.a = v;
          }
        }
        Trajectory traj = evolve(spec, in.kicker, in.rho0, in.icfg);
        SweepCell& cell = result.cells[i];
        cell.coords = std::move(coords);
        cell.features = extract_features(traj, spec.a_max(), lf);
        cell.label = classify(cell.features);
        cell.digest = fnv1a_hex(trajectory_csv(traj, spec.a_max()));
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t nw = std::min<std::size_t>(
      std::max(1, cfg.workers), cells);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < nw; ++w) pool.emplace_back(cell_worker);
  cell_worker();
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream os;
  for (const SweepAxis& a : result.axes) os << a.name << ',';
  os << "label";
  for (const char* col : kFeatureColumns) os << ',' << col;
  os << ",digest\n";
  for (const SweepCell& cell : result.cells) {
    for (Real c : cell.coords) os << format_real(c) << ',';
    os << to_string(cell.label);
    append_feature_row(os, cell.features);
    os << ',' << cell.digest << '\n';
  }
  write_file(out_path(cfg, "phase_map.csv"), os.str());

  json j = provenance(cfg);
  json axes = json::array();
  for (const SweepAxis& a : result.axes) {
    json aj;
    aj["name"] = a.name;
    aj["term"] = a.term;
    aj["values"] = real_list(a.values);
    axes.push_back(aj);
  }
  j["axes"] = axes;
  j["cells"] = cells;
  write_file(out_path(cfg, "scan.json"), j.dump(2) + "\n");
  return result;
}

void run_reformulate(const RunConfig& cfg) {
  const json& r = need(cfg.config, "reformulate", "config");
  Mat target = config_matrix(need(r, "target", "reformulate"));
  if (target.rows() != 2)
    throw ConfigError("reformulate handles one-qubit targets");
  if (herm_residual(target) > kHermTol)
    throw ConfigError("reformulate.target must be Hermitian");
  Vec psi0 = config_vector(need(r, "psi0", "reformulate"));
  if (psi0.size() != 2 || std::abs(psi0.norm() - 1.0) > 1e-9)
    throw ConfigError("reformulate.psi0 must be a normalized qubit state");
  Real a = need_real(r, "a", "reformulate");
  Real dt = need_real(r, "dt", "reformulate");
  Real horizon = need_real(r, "horizon", "reformulate");
  if (!(dt > 0.0) || !(a > 0.0) || !(horizon > a))
    throw ConfigError("reformulate needs dt > 0 and horizon > a > 0");
  check_on_grid(a, dt, "reformulate.a");

  StateHistory hist = prehistory(target, projector(psi0), horizon, dt);
  const long ka = std::lround(a / dt);
  const long kend = std::lround(horizon / dt);

  std::ostringstream os;
  os << "t,lambda_t,lambda_tma,lambda_R,lambda_I\n";
  Real max_residual = 0.0;
  for (long k = ka; k <= kend; ++k) {
    Mat rho_t = hist.rho_index(static_cast<std::size_t>(k));
    Mat rho_tma = hist.rho_index(static_cast<std::size_t>(k - ka));
    QubitECCouplings c = ec_couplings_one_qubit(target, rho_t, rho_tma);
    os << format_real(dt * static_cast<Real>(k)) << ','
       << format_real(c.lambda_t) << ',' << format_real(c.lambda_tma) << ','
       << format_real(c.lambda_R) << ',' << format_real(c.lambda_I) << '\n';
    Mat rebuilt = c.lambda_t * rho_t + c.lambda_tma * rho_tma +
                  c.lambda_R * (rho_tma * rho_t + rho_t * rho_tma) +
                  Cplx(0, 1) * c.lambda_I * (rho_tma * rho_t - rho_t * rho_tma);
    max_residual =
        std::max(max_residual, (rebuilt - target).cwiseAbs().maxCoeff());
  }
  write_file(out_path(cfg, "couplings.csv"), os.str());

  json j = provenance(cfg);
  j["max_reassembly_residual"] = max_residual;
  write_file(out_path(cfg, "reformulate.json"), j.dump(2) + "\n");
}

void run_circuit(const RunConfig& cfg) {
  const json& cc = need(cfg.config, "circuit", "config");
  Mat sigma0 = config_matrix(need(cc, "sigma0", "circuit"));
  validate_density(sigma0);

  const json& terms_j = need(cc, "terms", "circuit");
  if (!terms_j.is_array()) throw ConfigError("circuit.terms must be an array");
  std::vector<ProtocolTerm> terms;
  for (const json& tj : terms_j) {
    const json& lj = need(tj, "lambda", "circuit.terms[]");
    if (!lj.is_array() || lj.size() != 2 || !lj.at(0).is_number() ||
        !lj.at(1).is_number())
      throw ConfigError("circuit.terms[].lambda must be an [re, im] pair");
    Cplx lam(lj.at(0).get<Real>(), lj.at(1).get<Real>());
    ProtocolTerm term;
    Real mag = std::abs(lam);
    term.u = coupling_unitary(mag > 1.0 ? lam / mag : lam);
    term.scale = mag > 1.0 ? mag : 1.0;
    term.gamma = projector(Vec::Unit(2, 0));
    terms.push_back(std::move(term));
  }

  Mat final_sigma = sigma0;
  Real bound = 0.0;
  if (!terms.empty()) {
    ProtocolSpec p;
    p.dim = static_cast<int>(sigma0.rows());
    p.terms = std::move(terms);
    p.delta = need_real(cc, "delta", "circuit");
    p.steps = need_int(cc, "steps", "circuit");

    const json& fj = need(cc, "factors", "circuit");
    const json& mode = need(fj, "mode", "circuit.factors");
    HistorySupplier supply;
    std::shared_ptr<KickerFlow> flow;
    if (mode == "constant") {
      Mat rho = config_matrix(need(fj, "rho", "circuit.factors"));
      Mat rho_p = config_matrix(need(fj, "rho_p", "circuit.factors"));
      supply = [rho, rho_p](int, int, const Mat&) {
        return std::make_pair(rho, rho_p);
      };
    } else if (mode == "echo") {
      supply = [](int, int, const Mat& s) { return std::make_pair(s, s); };
    } else if (mode == "delay") {
      Mat kicker = config_matrix(need(fj, "kicker", "circuit.factors"));
      Mat rho0 = rho0_from_json(need(fj, "rho0", "circuit.factors"));
      Real a = need_real(fj, "a", "circuit.factors");
      // the past-state supplier replays the pre-quench flow, which is
      // only the delayed state while the protocol stays inside [a, 2a]
      if (p.delta * static_cast<Real>(p.steps) > a * (1.0 + kGridTol))
        throw ConfigError(
            "circuit delay mode covers at most one memory interval: "
            "steps * delta must not exceed factors.a");
      flow = std::make_shared<KickerFlow>(kicker, rho0);
      Real delta = p.delta;
      supply = [flow, delta](int k, int, const Mat& s) {
        return std::make_pair(flow->at(static_cast<Real>(k) * delta), s);
      };
    } else {
      throw ConfigError(
          "circuit.factors.mode must be constant, echo, or delay");
    }
    TrotterResult res = trotter_simulate(p, sigma0, supply);
    final_sigma = res.sigma;
    bound = res.error_bound;
  }

  json j = provenance(cfg);
  j["sigma_final"] = matrix_to_json(final_sigma);
  j["error_bound"] = bound;
  write_file(out_path(cfg, "circuit.json"), j.dump(2) + "\n");
}

void run_classify(const RunConfig& cfg) {
  SimulateInputs in = load_simulate(cfg);
  const Real lf = opt_real(cfg.config, "late_fraction", 0.4);
  Trajectory traj = evolve(in.spec, in.kicker, in.rho0, in.icfg);
  PhaseFeatures f = extract_features(traj, in.spec.a_max(), lf);
  PhaseLabel label = classify(f);
  std::array<Real, 5> scores = phase_scores(f, default_thresholds());

  json j = provenance(cfg);
  j["label"] = to_string(label);
  json sj = json::array();
  for (Real s : scores) sj.push_back(s);
  j["scores"] = sj;
  j["features"] = features_json(f);
  if (cfg.config.contains("transition_window")) {
    Real window = need_real(cfg.config, "transition_window", "config");
    json tj = json::array();
    for (const PhaseTransition& tr :
         detect_transitions(traj, in.spec.a_max(), window)) {
      json e;
      e["t"] = tr.t;
      e["from"] = to_string(tr.from);
      e["to"] = to_string(tr.to);
      tj.push_back(e);
    }
    j["transitions"] = tj;
  }
  write_file(out_path(cfg, "classification.json"), j.dump(2) + "\n");
}

void run_oracle(const RunConfig& cfg) {
  const json& oc = need(cfg.config, "oracle", "config");
  SpectrumInit s;
  for (const json& e : need(oc, "energies", "oracle")) {
    if (!e.is_number()) throw ConfigError("oracle.energies must hold numbers");
    s.energies.push_back(e.get<Real>());
  }
  for (const json& p : need(oc, "p0", "oracle")) {
    if (!p.is_number()) throw ConfigError("oracle.p0 must hold numbers");
    s.p0.push_back(p.get<Real>());
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("oracle spectrum: ") + e.what());
  }
  std::vector<Real> xis;
  for (const json& x : need(oc, "xi", "oracle")) {
    if (!x.is_number() || x.get<Real>() == 0.0)
      throw ConfigError("oracle.xi entries must be nonzero numbers");
    xis.push_back(x.get<Real>());
  }
  if (xis.empty()) throw ConfigError("oracle.xi must be non-empty");
  Real dt = need_real(oc, "dt", "oracle");
  Real t_max = need_real(oc, "t_max", "oracle");
  if (!(dt > 0.0) || !(t_max > 0.0))
    throw ConfigError("oracle needs dt > 0 and t_max > 0");

  std::ostringstream os;
  os << "xi,t";
  for (int n = 0; n < s.levels(); ++n) os << ",p_" << n;
  os << '\n';
  const long steps = std::lround(t_max / dt);
  for (Real xi : xis) {
    for (long k = 0; k <= steps; ++k) {
      Real t = dt * static_cast<Real>(k);
      os << format_real(xi) << ',' << format_real(t);
      for (Real p : localization_profile(s, xi, t)) os << ',' << format_real(p);
      os << '\n';
    }
  }
  write_file(out_path(cfg, "oracle.csv"), os.str());

  json j = provenance(cfg);
  json tj = json::array();
  for (Real xi : xis) {
    json e;
    e["xi"] = xi;
    e["characteristic_time"] = characteristic_time(s, xi);
    tj.push_back(e);
  }
  j["characteristic_times"] = tj;
  write_file(out_path(cfg, "oracle.json"), j.dump(2) + "\n");
}

int run_cli(const std::vector<std::string>& args, std::string* error) {
  CLI::App app{"numerical laboratory for state-history-coupled quantum dynamics"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format = "csv";
  int workers = 1;
  std::uint64_t seed = 0;
  for (const char* verb :
       {"simulate", "scan", "reformulate", "circuit", "classify", "oracle"}) {
    CLI::App* sub = app.add_subcommand(verb);
    sub->add_option("--config", config_path, "config file (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--format", format, "trajectory format")
        ->check(CLI::IsMember({"csv", "json", "bin"}));
    sub->add_option("--workers", workers, "concurrent sweep cells")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "provenance seed");
  }

  auto fail = [&](int code, const std::string& msg) {
    if (error) *error = msg;
    std::fprintf(stderr, "%s\n", msg.c_str());
    return code;
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::fputs(app.help().c_str(), stdout);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(2, std::string("argument error: ") + e.what());
  }

  try {
    RunConfig cfg;
    cfg.verb = app.get_subcommands().at(0)->get_name();
    std::string raw = read_file(config_path);
    cfg.config_digest = fnv1a_hex(raw);
    cfg.config = load_config_file(config_path);
    cfg.out_dir = out_dir;
    cfg.format = format == "json"  ? OutputFormat::Json
                 : format == "bin" ? OutputFormat::BinaryHistory
                                   : OutputFormat::Csv;
    cfg.workers = workers;
    cfg.seed = seed;
    const json& units = need(cfg.config, "units", "config");
    if (!units.is_string() || units.get<std::string>().empty())
      throw ConfigError(
          "config.units must state the time units (inverse energy, hbar = 1)");
    cfg.units = units.get<std::string>();

    if (cfg.verb == "simulate")
      run_simulate(cfg);
    else if (cfg.verb == "scan")
      run_scan(cfg);
    else if (cfg.verb == "reformulate")
      run_reformulate(cfg);
    else if (cfg.verb == "circuit")
      run_circuit(cfg);
    else if (cfg.verb == "classify")
      run_classify(cfg);
    else
      run_oracle(cfg);
    return 0;
  } catch (const BudgetExceeded& e) {
    return fail(4, std::string("budget: ") + e.what());
  } catch (const StepBudgetExceeded& e) {
    return fail(4, std::string("budget: ") + e.what());
  } catch (const ConfigError& e) {
    return fail(2, std::string("config: ") + e.what());
  } catch (const DimensionMismatch& e) {
    return fail(2, std::string("config: ") + e.what());
  } catch (const OffGridDistance& e) {
    return fail(2, std::string("config: ") + e.what());
  } catch (const OffGridTime& e) {
    return fail(2, std::string("config: ") + e.what());
  } catch (const NonHermitianKicker& e) {
    return fail(2, std::string("config: ") + e.what());
  } catch (const Error& e) {
    return fail(3, std::string("numeric: ") + e.what());
  } catch (const std::exception& e) {
    return fail(3, std::string("numeric: ") + e.what());
  }
}

}  // namespace ecqt
