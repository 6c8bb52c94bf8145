#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neurospike/eeg.hpp"

namespace neurospike {

inline constexpr const char* kLibraryVersion = "0.1.0";

// In-memory epoch dataset shared by the trainers. Float payload for
// preprocessed epochs, byte payload for delta-modulated spike trains.
struct EpochDataset {
  int channels = kNumChannels;
  long length = 0;
  bool spikes = false;
  double spike_threshold = 0.0;
  std::vector<std::vector<float>> epochs;        // when !spikes, [channels*length]
  std::vector<std::vector<std::uint8_t>> trains; // when spikes
  std::vector<int> labels;
  std::vector<int> trial_ids;
  std::vector<int> participants;

  std::size_t size() const { return labels.size(); }

  // Epoch as floats regardless of payload type.
  std::vector<float> as_floats(std::size_t i) const;

  std::string hash() const;
};

// --- Recording directories: trial_%04d.ntsr ([19,T] microvolts) plus
// trial_%04d.json ({fs, markers, participant, trial_id}). ---
void write_recording_dir(const std::string& dir, const std::vector<EegRecording>& trials);
std::vector<EegRecording> read_recording_dir(const std::string& dir,
                                             std::vector<std::string>* bad_files = nullptr);

// --- Epoch dataset directories: manifest.json plus one NTSR (or SPKT) file
// per epoch. ---
void write_epoch_dataset(const std::string& dir, const EpochDataset& ds,
                         const std::string& params_json);
EpochDataset read_epoch_dataset(const std::string& dir);

struct PreprocessConfig {
  double low_hz = 0.1;
  double high_hz = 1.0;
  double transition_hz = 0.1;
  int decimate = 1;
  long pad_length = 0;  // 0: derived as ceil(1848 / decimate)
  ArtifactConfig artifacts;

  long effective_pad() const {
    return pad_length > 0 ? pad_length : (kEpochTargetLength + decimate - 1) / decimate;
  }
};

struct PreprocessStats {
  int trials_in = 0;
  int trials_rejected = 0;   // marker problems
  int epochs_total = 0;
  int epochs_dropped = 0;    // artifact rule
  int channels_interpolated = 0;
  int periods_excised = 0;
  std::vector<std::string> diagnostics;
};

// filter -> (decimate) -> epoch (+ per-channel baseline) -> amplitude
// cleaning -> min-max normalize -> zero pad.
EpochDataset preprocess(const std::vector<EegRecording>& trials, const PreprocessConfig& config,
                        PreprocessStats* stats = nullptr);

// Delta modulation of a preprocessed dataset; returns the spike dataset and
// optionally the spike density (fraction of ones).
EpochDataset encode_dataset(const EpochDataset& ds, double threshold, double* density = nullptr);

std::string json_escape(const std::string& s);

}  // namespace neurospike
