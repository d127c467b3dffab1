#ifndef ECQT_PHASES_HPP
#define ECQT_PHASES_HPP

#include <array>
#include <string>
#include <vector>

#include "ecqt/integrator.hpp"

namespace ecqt {

enum class PhaseKind {
  I_fixed_point,
  II_regular_oscillation,
  III_irregular,
  IV_structured_modules,
  V_bistable_swaps,
  Mixed,
  Undetermined,
};

// Mixed carries the two or more principal kinds whose rules fired with
// comparable scores.
struct PhaseLabel {
  PhaseKind kind = PhaseKind::Undetermined;
  std::vector<PhaseKind> mixed;
};

bool operator==(const PhaseLabel& a, const PhaseLabel& b);
inline bool operator!=(const PhaseLabel& a, const PhaseLabel& b) {
  return !(a == b);
}
std::string to_string(PhaseKind k);
std::string to_string(const PhaseLabel& l);

// Late-window summary of one run: fidelity-series statistics plus
// population statistics read from the recorded states (classification
// runs therefore keep record_stride = 1).
struct PhaseFeatures {
  Real f_mean = 0.0;
  Real f_var = 0.0;
  Real f_amp = 0.0;        // max - min of the fidelity series
  Real pop_amp = 0.0;      // population swing after memory-scale averaging
  Real f_freq_frac = 0.0;  // dominant-bin power fraction, Hann-windowed
  Real pop_freq_frac = 0.0;
  Real spectral_entropy = 0.0;  // of the fidelity spectrum, in [0, 1]
  Real plateau_frac = 0.0;      // fraction of samples near F = 1
  int swap_count = 0;           // sharp dips of F out of the high regime
  Real swap_spacing_mean = 0.0;
  Real swap_spacing_rel_std = 0.0;
  Real module_score = 0.0;  // peak autocorrelation of the detrended series
};

// Soft gate: 0 below lo, 1 above hi, linear between (reversed use gives
// the "small" direction).
struct Band {
  Real lo = 0.0;
  Real hi = 1.0;
};

struct PhaseThresholds {
  std::string version = "ecqt-phase-v1";

  Real plateau_level = 0.9;  // F above this counts as plateau
  Real swap_high = 0.8;      // fidelity hysteresis levels for dip counting
  Real swap_low = 0.2;
  int min_swaps = 3;
  int max_spectrum_samples = 2048;  // window is strided down to this length

  Band f_amp_small;      // I and II want a quiet fidelity
  Band pop_amp_small;    // I wants quiet populations
  Band pop_amp_large;    // II wants large population swings
  Band pop_regular;      // II wants a dominant population frequency
  Band f_amp_large;      // III, IV, V want a moving fidelity
  Band entropy_high;     // III wants a broad spectrum
  Band module_low;       // III wants weak repetition
  Band module_high;      // IV wants strong repetition
  Band plateau_low;      // IV wants the fidelity off the F = 1 shelf
  Band plateau_high;     // V wants the dipped plateau
  Band spacing_regular;  // V wants equally parsed dips

  Real mixed_ratio = 1.5;  // top/second below this emits Mixed
  Real min_score = 0.2;    // best score below this is Undetermined
};

const PhaseThresholds& default_thresholds();

PhaseFeatures extract_features(const Trajectory& traj, Real a,
                               Real late_fraction);

// Scores of the five principal rules in label order, each the weakest of
// its gate terms.
std::array<Real, 5> phase_scores(const PhaseFeatures& f,
                                 const PhaseThresholds& th);

PhaseLabel classify(const PhaseFeatures& f,
                    const PhaseThresholds& th = default_thresholds());

struct PhaseTransition {
  Real t = 0.0;
  PhaseLabel from;
  PhaseLabel to;
};

// Sliding disjoint windows, each labeled independently; a change counts
// once the new label holds for two consecutive windows.
std::vector<PhaseTransition> detect_transitions(
    const Trajectory& traj, Real a, Real window,
    const PhaseThresholds& th = default_thresholds());

}  // namespace ecqt

#endif
