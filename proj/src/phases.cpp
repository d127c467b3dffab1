#include "ecqt/phases.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "ecqt/errors.hpp"

namespace ecqt {

namespace {

constexpr int kMinSeriesSamples = 16;
constexpr int kMinStateSamples = 8;

Real gate_high(Real x, const Band& b) {
  if (x <= b.lo) return 0.0;
  if (x >= b.hi) return 1.0;
  return (x - b.lo) / (b.hi - b.lo);
}

Real gate_low(Real x, const Band& b) { return 1.0 - gate_high(x, b); }

std::vector<Real> downsample(const std::vector<Real>& x, int cap) {
  if (int(x.size()) <= cap) return x;
  std::size_t stride = (x.size() + std::size_t(cap) - 1) / std::size_t(cap);
  std::vector<Real> out;
  out.reserve(x.size() / stride + 1);
  for (std::size_t i = 0; i < x.size(); i += stride) out.push_back(x[i]);
  return out;
}

struct SpectrumStats {
  Real freq_frac = 0.0;
  Real entropy = 0.0;
};

// Hann-windowed power spectrum of the detrended series; the dominant
// fraction sums the peak bin and its neighbors so a tone between bins
// still reads close to 1.
SpectrumStats spectrum_stats(const std::vector<Real>& raw, int cap) {
  std::vector<Real> x = downsample(raw, cap);
  const int n = int(x.size());
  if (n < kMinSeriesSamples) return {};
  Real mean = 0.0;
  for (Real v : x) mean += v;
  mean /= Real(n);
  for (int i = 0; i < n; ++i) {
    Real w = 0.5 * (1.0 - std::cos(2.0 * M_PI * Real(i) / Real(n - 1)));
    x[std::size_t(i)] = (x[std::size_t(i)] - mean) * w;
  }
  const int m = n / 2;
  std::vector<Real> power(static_cast<std::size_t>(m));
  Real total = 0.0;
  for (int k = 1; k <= m; ++k) {
    std::complex<Real> acc(0.0, 0.0);
    for (int i = 0; i < n; ++i) {
      Real ang = -2.0 * M_PI * Real(k) * Real(i) / Real(n);
      acc += x[std::size_t(i)] * std::complex<Real>(std::cos(ang), std::sin(ang));
    }
    power[std::size_t(k - 1)] = std::norm(acc);
    total += power[std::size_t(k - 1)];
  }
  if (total < 1e-24) return {};
  int kmax = 0;
  for (int k = 1; k < m; ++k)
    if (power[std::size_t(k)] > power[std::size_t(kmax)]) kmax = k;
  Real peak = 0.0;
  for (int k = std::max(0, kmax - 1); k <= std::min(m - 1, kmax + 1); ++k)
    peak += power[std::size_t(k)];
  SpectrumStats out;
  out.freq_frac = peak / total;
  Real h = 0.0;
  for (Real p : power) {
    Real q = p / total;
    if (q > 0.0) h -= q * std::log(q);
  }
  out.entropy = m > 1 ? h / std::log(Real(m)) : 0.0;
  return out;
}

Real autocorr_peak(const std::vector<Real>& raw, int cap) {
  std::vector<Real> x = downsample(raw, cap);
  const int n = int(x.size());
  if (n < kMinSeriesSamples) return 0.0;
  Real mean = 0.0;
  for (Real v : x) mean += v;
  mean /= Real(n);
  Real denom = 0.0;
  for (Real& v : x) {
    v -= mean;
    denom += v * v;
  }
  if (denom < 1e-24) return 0.0;
  const int kmin = std::max(4, n / 64);
  Real best = 0.0;
  for (int k = kmin; k <= n / 2; ++k) {
    Real acc = 0.0;
    for (int i = 0; i + k < n; ++i) acc += x[std::size_t(i)] * x[std::size_t(i + k)];
    best = std::max(best, acc / denom);
  }
  return best;
}

struct SwapStats {
  int count = 0;
  Real mean = 0.0;
  Real rel_std = 0.0;
};

// A swap shows up as one sharp excursion of the series from the high
// regime into the low regime; hysteresis keeps threshold chatter from
// inflating the count, and spacings are measured dip to dip.
SwapStats swap_stats(const std::vector<Real>& p, Real dt, Real t0,
                     const PhaseThresholds& th) {
  SwapStats out;
  std::vector<Real> events;
  int state = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    int s = p[i] >= th.swap_high ? 1 : p[i] <= th.swap_low ? -1 : 0;
    if (s == 0) continue;
    if (state == 1 && s == -1) events.push_back(t0 + dt * Real(i));
    state = s;
  }
  out.count = int(events.size());
  if (events.size() >= 2) {
    std::vector<Real> gaps;
    for (std::size_t i = 1; i < events.size(); ++i)
      gaps.push_back(events[i] - events[i - 1]);
    Real mean = 0.0;
    for (Real g : gaps) mean += g;
    mean /= Real(gaps.size());
    out.mean = mean;
    if (gaps.size() >= 2) {
      Real var = 0.0;
      for (Real g : gaps) var += (g - mean) * (g - mean);
      var /= Real(gaps.size());
      out.rel_std = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
    }
  }
  return out;
}

const std::vector<Real>* find_series(const Trajectory& traj, Real a) {
  for (const auto& kv : traj.fidelity_series)
    if (std::abs(kv.first - a) <= kGridTol) return &kv.second;
  return nullptr;
}

// Boxcar average over roughly one memory distance. Oscillations faster
// than the memory scale average out, so the amplitude that survives is
// the one the delayed coupling actually sees.
std::vector<Real> memory_average(const std::vector<Real>& p, long w) {
  w = std::max(1L, std::min(w, long(p.size()) / 2));
  std::vector<Real> out;
  out.reserve(p.size() - std::size_t(w) + 1);
  Real acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (long(i) >= w) acc -= p[i - std::size_t(w)];
    if (long(i) + 1 >= w) out.push_back(acc / Real(w));
  }
  return out;
}

PhaseFeatures features_on_range(const Trajectory& traj,
                                const std::vector<Real>& series, Real a,
                                std::size_t i0, std::size_t i1,
                                const PhaseThresholds& th) {
  if (i1 < i0 || i1 - i0 + 1 < std::size_t(kMinSeriesSamples))
    throw WindowTooShort("fewer than 16 series samples in the window");
  std::vector<Real> f(series.begin() + long(i0), series.begin() + long(i1) + 1);

  PhaseFeatures out;
  Real lo = f.front(), hi = f.front(), mean = 0.0;
  std::size_t plateau = 0;
  for (Real v : f) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mean += v;
    if (v >= th.plateau_level) ++plateau;
  }
  mean /= Real(f.size());
  Real var = 0.0;
  for (Real v : f) var += (v - mean) * (v - mean);
  out.f_mean = mean;
  out.f_var = var / Real(f.size());
  out.f_amp = hi - lo;
  out.plateau_frac = Real(plateau) / Real(f.size());
  SpectrumStats fs = spectrum_stats(f, th.max_spectrum_samples);
  out.f_freq_frac = fs.freq_frac;
  out.spectral_entropy = fs.entropy;
  out.module_score = autocorr_peak(f, th.max_spectrum_samples);
  SwapStats sw = swap_stats(f, traj.series_dt, traj.series_time(i0), th);
  out.swap_count = sw.count;
  out.swap_spacing_mean = sw.mean;
  out.swap_spacing_rel_std = sw.rel_std;

  // populations from the recorded states covering the same time span,
  // smoothed over the memory distance before amplitude extraction
  const StateHistory& hist = traj.history;
  const Real ta = traj.series_time(i0), tb = traj.series_time(i1);
  const Real hdt = hist.dt();
  long k0 = std::lround(std::ceil((ta - hist.t0()) / hdt - 1e-9));
  long k1 = std::lround(std::floor((tb - hist.t0()) / hdt + 1e-9));
  k0 = std::max(k0, 0L);
  k1 = std::min(k1, long(hist.size()) - 1);
  if (k1 - k0 + 1 < kMinStateSamples)
    throw WindowTooShort("fewer than 8 recorded states in the window");
  const int d = hist.dim();
  const long w_avg = std::lround(a / hdt);
  std::vector<Real> top_series;
  Real top_amp = -1.0;
  for (int l = 0; l < d; ++l) {
    std::vector<Real> p;
    p.reserve(std::size_t(k1 - k0 + 1));
    for (long k = k0; k <= k1; ++k)
      p.push_back(hist.rho_index(std::size_t(k))(l, l).real());
    std::vector<Real> avg = memory_average(p, w_avg);
    Real plo = avg.front(), phi = avg.front();
    for (Real v : avg) {
      plo = std::min(plo, v);
      phi = std::max(phi, v);
    }
    if (phi - plo > top_amp) {
      top_amp = phi - plo;
      top_series = std::move(avg);
    }
  }
  out.pop_amp = top_amp;
  out.pop_freq_frac = spectrum_stats(top_series, th.max_spectrum_samples).freq_frac;
  return out;
}

}  // namespace

bool operator==(const PhaseLabel& a, const PhaseLabel& b) {
  return a.kind == b.kind && a.mixed == b.mixed;
}

std::string to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::I_fixed_point: return "I";
    case PhaseKind::II_regular_oscillation: return "II";
    case PhaseKind::III_irregular: return "III";
    case PhaseKind::IV_structured_modules: return "IV";
    case PhaseKind::V_bistable_swaps: return "V";
    case PhaseKind::Mixed: return "Mixed";
    case PhaseKind::Undetermined: return "Undetermined";
  }
  return "?";
}

std::string to_string(const PhaseLabel& l) {
  if (l.kind != PhaseKind::Mixed) return to_string(l.kind);
  std::string out = "Mixed(";
  for (std::size_t i = 0; i < l.mixed.size(); ++i) {
    if (i) out += ",";
    out += to_string(l.mixed[i]);
  }
  return out + ")";
}

const PhaseThresholds& default_thresholds() {
  static const PhaseThresholds th = [] {
    PhaseThresholds t;
    t.f_amp_small = {0.05, 0.3};
    t.pop_amp_small = {0.05, 0.2};
    t.pop_amp_large = {0.2, 0.45};
    t.pop_regular = {0.35, 0.6};
    t.f_amp_large = {0.15, 0.5};
    t.entropy_high = {0.25, 0.5};
    t.module_low = {0.3, 0.6};
    t.module_high = {0.45, 0.75};
    t.plateau_low = {0.3, 0.6};
    t.plateau_high = {0.35, 0.6};
    t.spacing_regular = {0.1, 0.3};
    return t;
  }();
  return th;
}

PhaseFeatures extract_features(const Trajectory& traj, Real a,
                               Real late_fraction) {
  if (!(late_fraction > 0.0) || !(late_fraction < 1.0))
    throw ConfigError("late fraction must lie in (0, 1)");
  const std::vector<Real>* series = find_series(traj, a);
  if (!series) throw ConfigError("trajectory has no fidelity series at that distance");
  if (series->empty()) throw WindowTooShort("empty fidelity series");
  const std::size_t n = series->size();
  const Real horizon = traj.series_time(n - 1);
  const Real t_start = (1.0 - late_fraction) * horizon;
  if (t_start < traj.series_t0 - kGridTol)
    throw WindowTooShort("late window would begin before the series");
  long i0 = std::lround(std::ceil((t_start - traj.series_t0) / traj.series_dt - 1e-9));
  i0 = std::max(i0, 0L);
  return features_on_range(traj, *series, a, std::size_t(i0), n - 1,
                           default_thresholds());
}

std::array<Real, 5> phase_scores(const PhaseFeatures& f,
                                 const PhaseThresholds& th) {
  std::array<Real, 5> s{};
  s[0] = std::min(gate_low(f.f_amp, th.f_amp_small),
                  gate_low(f.pop_amp, th.pop_amp_small));
  s[1] = std::min({gate_low(f.f_amp, th.f_amp_small),
                   gate_high(f.pop_amp, th.pop_amp_large),
                   gate_high(f.pop_freq_frac, th.pop_regular)});
  s[2] = std::min({gate_high(f.f_amp, th.f_amp_large),
                   gate_high(f.spectral_entropy, th.entropy_high),
                   gate_low(f.module_score, th.module_low),
                   gate_low(f.plateau_frac, th.plateau_low)});
  s[3] = std::min({gate_high(f.f_amp, th.f_amp_large),
                   gate_high(f.module_score, th.module_high),
                   gate_low(f.plateau_frac, th.plateau_low)});
  s[4] = std::min({gate_high(f.f_amp, th.f_amp_large),
                   gate_high(f.plateau_frac, th.plateau_high),
                   f.swap_count >= th.min_swaps ? 1.0 : 0.0,
                   gate_low(f.swap_spacing_rel_std, th.spacing_regular)});
  return s;
}

PhaseLabel classify(const PhaseFeatures& f, const PhaseThresholds& th) {
  static const PhaseKind kinds[5] = {
      PhaseKind::I_fixed_point, PhaseKind::II_regular_oscillation,
      PhaseKind::III_irregular, PhaseKind::IV_structured_modules,
      PhaseKind::V_bistable_swaps};
  std::array<Real, 5> s = phase_scores(f, th);
  int best = 0;
  for (int i = 1; i < 5; ++i)
    if (s[std::size_t(i)] > s[std::size_t(best)]) best = i;
  PhaseLabel out;
  if (s[std::size_t(best)] < th.min_score) return out;  // Undetermined
  std::vector<PhaseKind> rivals;
  for (int i = 0; i < 5; ++i)
    if (i != best && s[std::size_t(i)] >= th.min_score &&
        s[std::size_t(best)] < th.mixed_ratio * s[std::size_t(i)])
      rivals.push_back(kinds[i]);
  if (!rivals.empty()) {
    out.kind = PhaseKind::Mixed;
    out.mixed.push_back(kinds[best]);
    for (PhaseKind k : rivals) out.mixed.push_back(k);
    std::sort(out.mixed.begin(), out.mixed.end());
    return out;
  }
  out.kind = kinds[best];
  return out;
}

std::vector<PhaseTransition> detect_transitions(const Trajectory& traj, Real a,
                                                Real window,
                                                const PhaseThresholds& th) {
  if (!(window > 0.0)) throw ConfigError("window must be positive");
  const std::vector<Real>* series = find_series(traj, a);
  if (!series) throw ConfigError("trajectory has no fidelity series at that distance");
  const std::size_t n = series->size();
  if (n == 0) throw WindowTooShort("empty fidelity series");
  const Real horizon = traj.series_time(n - 1);
  if (horizon < 3.0 * window - kGridTol)
    throw WindowTooShort("need at least three windows before the horizon");
  const long m = std::lround(std::floor(window / traj.series_dt + 1e-9));
  if (m < kMinSeriesSamples)
    throw WindowTooShort("window holds fewer than 16 series samples");
  const std::size_t nwin = n / std::size_t(m);
  if (nwin < 3) throw WindowTooShort("need at least three windows in the series");

  std::vector<PhaseLabel> labels;
  for (std::size_t j = 0; j < nwin; ++j) {
    std::size_t i0 = j * std::size_t(m);
    std::size_t i1 = std::min(i0 + std::size_t(m) - 1, n - 1);
    labels.push_back(
        classify(features_on_range(traj, *series, a, i0, i1, th), th));
  }
  std::vector<PhaseTransition> out;
  PhaseLabel current = labels[0];
  for (std::size_t j = 1; j + 1 < labels.size(); ++j) {
    if (!(labels[j] == current) && labels[j + 1] == labels[j]) {
      PhaseTransition tr;
      tr.t = traj.series_time(j * std::size_t(m));
      tr.from = current;
      tr.to = labels[j];
      out.push_back(tr);
      current = labels[j];
    }
  }
  return out;
}

}  // namespace ecqt
