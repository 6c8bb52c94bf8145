#include "neurospike/eeg.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace neurospike {

const std::array<ElectrodePosition, kNumChannels> kMontage1020 = {{
    {"Fp1", -0.3090, 0.9511, 0.0000},
    {"Fp2", 0.3090, 0.9511, 0.0000},
    {"F7", -0.8090, 0.5878, 0.0000},
    {"F3", -0.5450, 0.6730, 0.5000},
    {"Fz", 0.0000, 0.7071, 0.7071},
    {"F4", 0.5450, 0.6730, 0.5000},
    {"F8", 0.8090, 0.5878, 0.0000},
    {"T3", -1.0000, 0.0000, 0.0000},
    {"C3", -0.7071, 0.0000, 0.7071},
    {"Cz", 0.0000, 0.0000, 1.0000},
    {"C4", 0.7071, 0.0000, 0.7071},
    {"T4", 1.0000, 0.0000, 0.0000},
    {"T5", -0.8090, -0.5878, 0.0000},
    {"P3", -0.5450, -0.6730, 0.5000},
    {"Pz", 0.0000, -0.7071, 0.7071},
    {"P4", 0.5450, -0.6730, 0.5000},
    {"T6", 0.8090, -0.5878, 0.0000},
    {"O1", -0.3090, -0.9511, 0.0000},
    {"O2", 0.3090, -0.9511, 0.0000},
}};

const std::array<const char*, 5> kCnvChannels = {"Fz", "Cz", "Pz", "C3", "C4"};

int montage_index(std::string_view name) {
  for (int i = 0; i < kNumChannels; ++i)
    if (name == kMontage1020[static_cast<std::size_t>(i)].name) return i;
  return -1;
}

// ---------------------------------------------------------------------------
// FFT convolution backend
// ---------------------------------------------------------------------------

namespace {

int next_pow2(long n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// One cached FFTW plan set per transform size. Access is serialized; FFTW
// planning is not thread-safe and the buffers are shared.
struct ConvolverState {
  int n = 0;
  std::vector<double> real;
  std::vector<std::complex<double>> spec;
  std::vector<std::complex<double>> kernel_spec;
  std::uint64_t kernel_key = 0;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit ConvolverState(int size) : n(size), real(static_cast<std::size_t>(size)), spec(static_cast<std::size_t>(size) / 2 + 1) {
    fwd = fftw_plan_dft_r2c_1d(n, real.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                               FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spec.data()), real.data(),
                               FFTW_ESTIMATE);
    if (!fwd || !inv) throw std::runtime_error("fftw: plan creation failed");
  }
  ~ConvolverState() {
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
  }
  ConvolverState(const ConvolverState&) = delete;
  ConvolverState& operator=(const ConvolverState&) = delete;
};

std::mutex& convolver_mutex() {
  static std::mutex m;
  return m;
}

ConvolverState& convolver_for(int n) {
  static std::map<int, std::unique_ptr<ConvolverState>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<ConvolverState>(n)).first;
  return *it->second;
}

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ull;
  Fnv& mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
    return *this;
  }
  Fnv& mix_double(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    return mix(v);
  }
};

std::uint64_t filter_key(const FirFilter& f) {
  Fnv state;
  return state.mix(f.taps.size()).mix_double(f.fs).mix_double(f.low).mix_double(f.high)
      .mix_double(f.transition).h;
}

}  // namespace

FirFilter FirFilter::design_bandpass(double fs, double low, double high, double transition) {
  if (!(fs > 0.0) || !(high > 0.0) || high >= fs / 2.0 || (low > 0.0 && low >= high))
    throw std::invalid_argument("fir: require 0 <= low < high < fs/2");
  if (!(transition > 0.0)) throw std::invalid_argument("fir: transition width must be positive");

  FirFilter f;
  f.fs = fs;
  f.low = low;
  f.high = high;
  f.transition = transition;

  long n = static_cast<long>(std::ceil(3.3 * fs / transition));
  if (n % 2 == 0) ++n;  // linear phase wants odd length
  f.taps.assign(static_cast<std::size_t>(n), 0.0);
  const long mid = (n - 1) / 2;

  auto windowed_sinc = [&](double fc, std::vector<double>& out) {
    // Hamming-windowed lowpass, normalized to unit DC gain.
    const double fn = fc / fs;
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
      const double m = static_cast<double>(i - mid);
      double v;
      if (m == 0.0) {
        v = 2.0 * fn;
      } else {
        v = std::sin(2.0 * M_PI * fn * m) / (M_PI * m);
      }
      v *= 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n - 1));
      out[static_cast<std::size_t>(i)] = v;
      sum += v;
    }
    for (auto& v : out) v /= sum;
  };

  std::vector<double> lp_high(static_cast<std::size_t>(n));
  windowed_sinc(high, lp_high);
  if (low > 0.0) {
    std::vector<double> lp_low(static_cast<std::size_t>(n));
    windowed_sinc(low, lp_low);
    for (long i = 0; i < n; ++i)
      f.taps[static_cast<std::size_t>(i)] = lp_high[static_cast<std::size_t>(i)] - lp_low[static_cast<std::size_t>(i)];
  } else {
    f.taps = std::move(lp_high);
  }
  return f;
}

std::vector<double> FirFilter::apply(const std::vector<double>& x) const {
  const long len = static_cast<long>(x.size());
  const long m = static_cast<long>(taps.size());
  if (len * 8 < m)
    throw std::invalid_argument(
        "fir: signal of " + std::to_string(len) + " samples is far shorter than the " +
        std::to_string(m) + "-tap filter; filter whole trials, not epochs");

  const int n = next_pow2(len + m - 1);
  const std::size_t nspec = static_cast<std::size_t>(n) / 2 + 1;
  const long gd = (m - 1) / 2;

  std::lock_guard<std::mutex> lock(convolver_mutex());
  ConvolverState& st = convolver_for(n);

  const std::uint64_t key = filter_key(*this);
  if (st.kernel_key != key || st.kernel_spec.size() != nspec) {
    std::fill(st.real.begin(), st.real.end(), 0.0);
    std::copy(taps.begin(), taps.end(), st.real.begin());
    fftw_execute(st.fwd);
    st.kernel_spec.assign(st.spec.begin(), st.spec.end());
    st.kernel_key = key;
  }

  std::fill(st.real.begin(), st.real.end(), 0.0);
  std::copy(x.begin(), x.end(), st.real.begin());
  fftw_execute(st.fwd);
  for (std::size_t i = 0; i < nspec; ++i) st.spec[i] *= st.kernel_spec[i];
  fftw_execute(st.inv);

  std::vector<double> y(static_cast<std::size_t>(len));
  const double scale = 1.0 / static_cast<double>(n);
  for (long i = 0; i < len; ++i) y[static_cast<std::size_t>(i)] = st.real[static_cast<std::size_t>(i + gd)] * scale;
  return y;
}

void fir_bandpass(EegRecording& rec, const FirFilter& filter) {
  std::vector<double> ch(static_cast<std::size_t>(rec.samples));
  for (int c = 0; c < kNumChannels; ++c) {
    std::copy(rec.channel(c), rec.channel(c) + rec.samples, ch.begin());
    auto filtered = filter.apply(ch);
    std::copy(filtered.begin(), filtered.end(), rec.channel(c));
  }
}

void decimate_recording(EegRecording& rec, int factor) {
  if (factor < 1) throw std::invalid_argument("decimate: factor must be >= 1");
  if (factor == 1) return;
  const long out_len = (rec.samples + factor - 1) / factor;
  std::vector<double> out(static_cast<std::size_t>(kNumChannels) * out_len);
  for (int c = 0; c < kNumChannels; ++c)
    for (long t = 0; t < out_len; ++t)
      out[static_cast<std::size_t>(c) * out_len + t] = rec.at(c, t * factor);
  rec.data = std::move(out);
  rec.samples = out_len;
  rec.fs /= factor;
  for (auto& mk : rec.markers) mk.sample /= factor;
}

// ---------------------------------------------------------------------------
// Quality index
// ---------------------------------------------------------------------------

double band_rms(const std::vector<double>& window, double fs, double f_low, double f_high) {
  const long n = static_cast<long>(window.size());
  if (n < 2) throw std::invalid_argument("band_rms: window too short");
  double mean_square = 0.0;
  for (long k = 1; k <= n / 2; ++k) {
    const double freq = static_cast<double>(k) * fs / static_cast<double>(n);
    if (freq < f_low - 1e-9 || freq > f_high + 1e-9) continue;
    // Goertzel power at bin k.
    const double w = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    const double coeff = 2.0 * std::cos(w);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (long t = 0; t < n; ++t) {
      s0 = window[static_cast<std::size_t>(t)] + coeff * s1 - s2;
      s2 = s1;
      s1 = s0;
    }
    const double power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    const double factor = (2 * k == n) ? 1.0 : 2.0;  // Nyquist bin is not mirrored
    mean_square += factor * power / (static_cast<double>(n) * static_cast<double>(n));
  }
  return std::sqrt(mean_square);
}

QualityIndex quality_index(const std::vector<double>& window, double fs,
                           const QualityConfig& config) {
  if (window.empty()) throw std::invalid_argument("quality_index: empty window");
  QualityIndex q;
  q.line_rms = band_rms(window, fs, 55.0, 65.0);
  q.main_rms = band_rms(window, fs, 1.0, 40.0);
  q.offset = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
  const double rl = q.line_rms / config.line_weight;
  const double rm = q.main_rms / config.main_weight;
  const double ro = q.offset / config.offset_weight;
  q.qi = std::tanh(std::sqrt(rl * rl + rm * rm + ro * ro));
  q.color = q.qi < 0.5 ? QualityColor::kGreen
                       : (q.qi < 0.8 ? QualityColor::kOrange : QualityColor::kRed);
  return q;
}

// ---------------------------------------------------------------------------
// Epoching
// ---------------------------------------------------------------------------

namespace {

const char* kCountdownLabels[6] = {"5", "4", "3", "2", "1", "STOP"};

}  // namespace

std::vector<Epoch> segment_epochs(const EegRecording& rec) {
  const std::string trial = "trial " + std::to_string(rec.trial_id);
  long idx[6];
  for (int i = 0; i < 6; ++i) {
    long found = -1;
    for (const auto& mk : rec.markers) {
      if (mk.label == kCountdownLabels[i]) {
        if (found >= 0) throw std::runtime_error(trial + ": duplicate marker '" + mk.label + "'");
        found = mk.sample;
      }
    }
    if (found < 0)
      throw std::runtime_error(trial + ": missing marker '" + std::string(kCountdownLabels[i]) + "'");
    idx[i] = found;
  }
  for (int i = 1; i < 6; ++i)
    if (idx[i] <= idx[i - 1]) throw std::runtime_error(trial + ": markers out of order");
  if (idx[0] < 2)
    throw std::runtime_error(trial + ": no pre-countdown segment before the '5' marker");
  if (idx[5] > rec.samples) throw std::runtime_error(trial + ": marker beyond end of recording");

  std::vector<Epoch> epochs;
  long bounds[7] = {0, idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]};
  for (int e = 0; e < 6; ++e) {
    Epoch ep;
    ep.length = bounds[e + 1] - bounds[e];
    if (ep.length < 2) throw std::runtime_error(trial + ": degenerate epoch between markers");
    ep.label = (e == 5) ? 1 : 0;
    ep.participant = rec.participant;
    ep.trial_id = rec.trial_id;
    ep.data.resize(static_cast<std::size_t>(kNumChannels) * ep.length);
    for (int c = 0; c < kNumChannels; ++c)
      std::copy(rec.channel(c) + bounds[e], rec.channel(c) + bounds[e + 1], ep.channel(c));
    baseline_correct(ep);
    epochs.push_back(std::move(ep));
  }
  return epochs;
}

void baseline_correct(Epoch& epoch) {
  for (int c = 0; c < kNumChannels; ++c) {
    double* ch = epoch.channel(c);
    double mean = 0.0;
    for (long t = 0; t < epoch.length; ++t) mean += ch[t];
    mean /= static_cast<double>(epoch.length);
    for (long t = 0; t < epoch.length; ++t) ch[t] -= mean;
  }
}

CleanResult reject_artifacts(Epoch& epoch, const ArtifactConfig& config) {
  CleanResult result;
  const long L = epoch.length;
  std::vector<bool> good(kNumChannels, true);

  for (int c = 0; c < kNumChannels; ++c) {
    double* ch = epoch.channel(c);
    long over = 0;
    for (long t = 0; t < L; ++t)
      if (std::abs(ch[t]) > config.amplitude_limit) ++over;
    if (over == 0) continue;
    if (static_cast<double>(over) >= config.duration_fraction * static_cast<double>(L)) {
      good[static_cast<std::size_t>(c)] = false;
      ++result.bad_channels;
      continue;
    }
    // Short offending periods: excise and bridge linearly in time.
    long t = 0;
    while (t < L) {
      if (std::abs(ch[t]) <= config.amplitude_limit) {
        ++t;
        continue;
      }
      long end = t;
      while (end < L && std::abs(ch[end]) > config.amplitude_limit) ++end;
      const long left = t - 1, right = end;
      if (left < 0 && right >= L) {
        break;  // whole channel over limit; handled by the duration rule above
      } else if (left < 0) {
        for (long i = t; i < end; ++i) ch[i] = ch[right];
      } else if (right >= L) {
        for (long i = t; i < end; ++i) ch[i] = ch[left];
      } else {
        const double a = ch[left], b = ch[right];
        const double span = static_cast<double>(right - left);
        for (long i = t; i < end; ++i)
          ch[i] = a + (b - a) * static_cast<double>(i - left) / span;
      }
      ++result.excised_periods;
      t = end;
    }
  }

  if (result.bad_channels > config.max_bad_channels) {
    result.kept = false;
    return result;
  }
  for (int c = 0; c < kNumChannels; ++c)
    if (!good[static_cast<std::size_t>(c)]) interpolate_channel(epoch, c, good);
  result.kept = true;
  return result;
}

void interpolate_channel(Epoch& epoch, int bad_channel, const std::vector<bool>& good) {
  if (bad_channel < 0 || bad_channel >= kNumChannels)
    throw std::invalid_argument("interpolate_channel: channel index out of range");
  double weight_sum = 0.0;
  std::array<double, kNumChannels> w{};
  const auto& p = kMontage1020[static_cast<std::size_t>(bad_channel)];
  for (int c = 0; c < kNumChannels; ++c) {
    if (c == bad_channel || !good[static_cast<std::size_t>(c)]) continue;
    const auto& q = kMontage1020[static_cast<std::size_t>(c)];
    const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 <= 0.0) throw std::runtime_error("interpolate_channel: coincident electrodes");
    w[static_cast<std::size_t>(c)] = 1.0 / d2;
    weight_sum += w[static_cast<std::size_t>(c)];
  }
  if (weight_sum <= 0.0)
    throw std::runtime_error("interpolate_channel: no good channels to interpolate from");
  double* dst = epoch.channel(bad_channel);
  for (long t = 0; t < epoch.length; ++t) {
    double acc = 0.0;
    for (int c = 0; c < kNumChannels; ++c)
      if (w[static_cast<std::size_t>(c)] > 0.0) acc += w[static_cast<std::size_t>(c)] * epoch.at(c, t);
    dst[t] = acc / weight_sum;
  }
}

void minmax_normalize(Epoch& epoch) {
  for (int c = 0; c < kNumChannels; ++c) {
    double* ch = epoch.channel(c);
    double lo = ch[0], hi = ch[0];
    for (long t = 1; t < epoch.length; ++t) {
      lo = std::min(lo, ch[t]);
      hi = std::max(hi, ch[t]);
    }
    if (hi == lo) {
      std::fill(ch, ch + epoch.length, 0.0);  // constant channel carries nothing
      continue;
    }
    const double range = hi - lo;
    for (long t = 0; t < epoch.length; ++t) ch[t] = (ch[t] - lo) / range;
  }
}

void zero_pad(Epoch& epoch, long target) {
  if (epoch.length > target)
    throw std::invalid_argument("zero_pad: epoch of " + std::to_string(epoch.length) +
                                " samples exceeds target " + std::to_string(target) +
                                "; truncation is not supported");
  if (epoch.length == target) return;
  std::vector<double> out(static_cast<std::size_t>(kNumChannels) * target, 0.0);
  for (int c = 0; c < kNumChannels; ++c)
    std::copy(epoch.channel(c), epoch.channel(c) + epoch.length,
              out.begin() + static_cast<std::size_t>(c) * target);
  epoch.data = std::move(out);
  epoch.length = target;
}

SpikeTrain delta_modulate(const Epoch& epoch, double threshold) {
  if (!(threshold > 0.0))
    throw std::invalid_argument("delta_modulate: threshold must be positive");
  for (double v : epoch.data)
    if (v < -1e-9 || v > 1.0 + 1e-9)
      throw std::domain_error("delta_modulate: epoch is not normalized to [0,1]");
  SpikeTrain train;
  train.length = epoch.length;
  train.threshold = threshold;
  train.data.assign(static_cast<std::size_t>(kNumChannels) * epoch.length, 0);
  for (int c = 0; c < kNumChannels; ++c) {
    const double* ch = epoch.channel(c);
    std::uint8_t* out = train.data.data() + static_cast<std::size_t>(c) * epoch.length;
    for (long t = 1; t < epoch.length; ++t)
      out[t] = std::abs(ch[t] - ch[t - 1]) > threshold ? 1 : 0;
  }
  return train;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

namespace {

// Voss-McCartney pink noise, roughly unit variance.
std::vector<double> pink_noise(long n, Rng& rng) {
  constexpr int kRows = 16;
  double rows[kRows];
  double sum = 0.0;
  for (auto& r : rows) {
    r = rng.normal();
    sum += r;
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  const double norm = 1.0 / std::sqrt(static_cast<double>(kRows));
  out[0] = sum * norm;
  for (long t = 1; t < n; ++t) {
    int row = 0;
    long v = t;
    while ((v & 1) == 0 && row < kRows - 1) {
      v >>= 1;
      ++row;
    }
    sum -= rows[row];
    rows[row] = rng.normal();
    sum += rows[row];
    out[static_cast<std::size_t>(t)] = sum * norm;
  }
  return out;
}

}  // namespace

std::vector<EegRecording> synthesize_cnv_dataset(const SynthConfig& config) {
  if (config.n_trials <= 0 || !(config.noise_std > 0.0) || config.ramp_amplitude < 0.0 ||
      !(config.fs > 0.0))
    throw std::invalid_argument("synthesize_cnv_dataset: invalid parameters");

  std::array<int, 5> cnv_idx{};
  for (std::size_t i = 0; i < kCnvChannels.size(); ++i)
    cnv_idx[i] = montage_index(kCnvChannels[i]);

  const long spacing = static_cast<long>(std::lround(config.marker_spacing * config.fs));
  const long pre = static_cast<long>(std::lround(config.pre_roll * config.fs));
  const long post = static_cast<long>(std::lround(config.post_roll * config.fs));
  const long total = pre + 5 * spacing + post;
  if (config.marker_jitter * 2 >= spacing || pre <= config.marker_jitter)
    throw std::invalid_argument("synthesize_cnv_dataset: jitter too large for marker spacing");

  std::vector<EegRecording> trials;
  trials.reserve(static_cast<std::size_t>(config.n_trials));
  for (int i = 0; i < config.n_trials; ++i) {
    Rng rng = stream_rng(config.seed, "synth-trial", static_cast<std::uint64_t>(i));
    EegRecording rec;
    rec.fs = config.fs;
    rec.participant = 1 + i / 240;
    rec.trial_id = i;
    rec.samples = total;
    rec.data.resize(static_cast<std::size_t>(kNumChannels) * total);

    for (int m = 0; m < 6; ++m) {
      long s = pre + m * spacing;
      if (config.marker_jitter > 0)
        s += static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * config.marker_jitter + 1))) -
             config.marker_jitter;
      rec.markers.push_back({kCountdownLabels[m], s});
    }

    for (int c = 0; c < kNumChannels; ++c) {
      auto pink = pink_noise(total, rng);
      double* ch = rec.channel(c);
      for (long t = 0; t < total; ++t)
        ch[t] = 0.5 * config.noise_std * pink[static_cast<std::size_t>(t)] +
                config.noise_std * rng.normal();
    }

    // Negative-going CNV ramp across the final countdown segment.
    const long t1 = rec.markers[4].sample;
    const long tstop = rec.markers[5].sample;
    const double span = static_cast<double>(tstop - t1);
    for (int k : cnv_idx) {
      double* ch = rec.channel(k);
      for (long t = t1; t < tstop; ++t)
        ch[t] -= config.ramp_amplitude * static_cast<double>(t - t1) / span;
    }
    trials.push_back(std::move(rec));
  }
  return trials;
}

}  // namespace neurospike
