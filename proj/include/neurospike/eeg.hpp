#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neurospike/random.hpp"

namespace neurospike {

inline constexpr int kNumChannels = 19;
inline constexpr int kEpochTargetLength = 1848;

// 10-20 montage, unit-sphere coordinates (x right, y front, z up).
struct ElectrodePosition {
  const char* name;
  double x, y, z;
};
extern const std::array<ElectrodePosition, kNumChannels> kMontage1020;
int montage_index(std::string_view name);  // -1 when unknown

struct Marker {
  std::string label;
  long sample = 0;
};

struct EegRecording {
  double fs = 500.0;
  int participant = 0;
  int trial_id = 0;
  long samples = 0;
  std::vector<Marker> markers;
  std::vector<double> data;  // [19, samples] row-major, microvolts

  double& at(int ch, long t) { return data[static_cast<std::size_t>(ch) * samples + t]; }
  double at(int ch, long t) const { return data[static_cast<std::size_t>(ch) * samples + t]; }
  const double* channel(int ch) const { return data.data() + static_cast<std::size_t>(ch) * samples; }
  double* channel(int ch) { return data.data() + static_cast<std::size_t>(ch) * samples; }
};

struct Epoch {
  long length = 0;
  int label = 0;
  int participant = 0;
  int trial_id = 0;
  std::vector<double> data;  // [19, length] row-major

  double& at(int ch, long t) { return data[static_cast<std::size_t>(ch) * length + t]; }
  double at(int ch, long t) const { return data[static_cast<std::size_t>(ch) * length + t]; }
  double* channel(int ch) { return data.data() + static_cast<std::size_t>(ch) * length; }
  const double* channel(int ch) const { return data.data() + static_cast<std::size_t>(ch) * length; }
};

struct SpikeTrain {
  long length = 0;
  double threshold = 0.0;
  std::vector<std::uint8_t> data;  // [19, length], values 0/1
};

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

// Linear-phase windowed-sinc (Hamming) bandpass. low <= 0 degenerates to a
// plain lowpass. Tap count follows the 3.3/transition-width rule (~16.5k taps
// for the 0.1 Hz default at 500 Hz).
struct FirFilter {
  double fs = 500.0;
  double low = 0.1;
  double high = 1.0;
  double transition = 0.1;
  std::vector<double> taps;

  static FirFilter design_bandpass(double fs, double low, double high, double transition = 0.1);

  int group_delay() const { return static_cast<int>(taps.size() - 1) / 2; }

  // 'same' convolution with group-delay compensation; the signal edges are
  // zero-padded internally. Signals far shorter than the filter are refused:
  // filter whole trials, never epochs.
  std::vector<double> apply(const std::vector<double>& x) const;
};

void fir_bandpass(EegRecording& rec, const FirFilter& filter);

// Keep every factor-th sample (markers and fs rescaled). The caller is
// responsible for having lowpassed below the new Nyquist first.
void decimate_recording(EegRecording& rec, int factor);

// ---------------------------------------------------------------------------
// Quality index
// ---------------------------------------------------------------------------

struct QualityConfig {
  double line_weight = 100.0;       // microvolts
  double main_weight = 250.0;       // microvolts
  double offset_weight = 280000.0;  // 280 mV in microvolts
};

enum class QualityColor { kGreen, kOrange, kRed };

struct QualityIndex {
  double qi = 0.0;
  QualityColor color = QualityColor::kGreen;
  double line_rms = 0.0;    // 55-65 Hz band
  double main_rms = 0.0;    // 1-40 Hz band
  double offset = 0.0;      // window mean
};

// QI = tanh(sqrt((line/W_L)^2 + (main/W_m)^2 + (offset/W_O)^2)) for one
// channel window; green < 0.5 <= orange < 0.8 <= red.
QualityIndex quality_index(const std::vector<double>& window, double fs,
                           const QualityConfig& config = {});

// RMS of the ideal-bandpass component of a window (Goertzel per DFT bin).
double band_rms(const std::vector<double>& window, double fs, double f_low, double f_high);

// ---------------------------------------------------------------------------
// Epoching and cleaning
// ---------------------------------------------------------------------------

// Slices one trial into six epochs: the pre-countdown segment plus 5->4,
// 4->3, 3->2, 2->1 labeled 0, and 1->STOP labeled 1. Each epoch is baseline
// corrected per channel. Throws on missing, duplicate, or mis-ordered
// markers.
std::vector<Epoch> segment_epochs(const EegRecording& rec);

void baseline_correct(Epoch& epoch);

struct ArtifactConfig {
  double amplitude_limit = 100.0;  // microvolts
  double duration_fraction = 0.10;
  int max_bad_channels = 10;       // epochs with more than this are dropped
};

struct CleanResult {
  bool kept = false;
  int bad_channels = 0;
  int excised_periods = 0;
};

// Amplitude-based cleaning: channels out of range for >= 10% of the epoch are
// replaced from spatial neighbors; shorter offending periods are excised and
// linearly re-interpolated in time; epochs with more than max_bad_channels
// bad are dropped.
CleanResult reject_artifacts(Epoch& epoch, const ArtifactConfig& config = {});

// Replace one channel by the inverse-square-distance weighted average of the
// good channels on the unit sphere.
void interpolate_channel(Epoch& epoch, int bad_channel, const std::vector<bool>& good);

// Per channel (x - min)/(max - min); constant channels map to zeros.
void minmax_normalize(Epoch& epoch);

// Append zeros up to target length; longer epochs are an error (the pipeline
// never truncates).
void zero_pad(Epoch& epoch, long target = kEpochTargetLength);

// ---------------------------------------------------------------------------
// Delta modulation
// ---------------------------------------------------------------------------

// spike[c][t] = 1 iff |x[c][t] - x[c][t-1]| > threshold (t >= 1); first
// column all zero. Input must be normalized to [0,1].
SpikeTrain delta_modulate(const Epoch& epoch, double threshold);

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

struct SynthConfig {
  int n_trials = 240;
  double noise_std = 10.0;       // white noise sigma, microvolts
  double ramp_amplitude = 30.0;  // CNV ramp depth, microvolts
  std::uint64_t seed = 1;
  double fs = 500.0;
  double marker_spacing = 1.0;   // seconds between countdown markers
  double pre_roll = 1.0;         // seconds of recording before the "5" marker
  double post_roll = 0.25;       // seconds after STOP
  int marker_jitter = 15;        // samples, uniform +/- applied per marker
};

// Slow-cortical-potential-like trials: pink-plus-white noise on every channel
// with a negative-going linear ramp on the centro-medial channels (Fz, Cz,
// Pz, C3, C4) during the final countdown segment. Deterministic per seed.
std::vector<EegRecording> synthesize_cnv_dataset(const SynthConfig& config);

extern const std::array<const char*, 5> kCnvChannels;

}  // namespace neurospike
