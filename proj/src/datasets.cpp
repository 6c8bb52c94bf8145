#include "neurospike/datasets.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "neurospike/ntsr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace neurospike {

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string channel_order_json() {
  std::string s = "[";
  for (int c = 0; c < kNumChannels; ++c) {
    if (c) s += ",";
    s += std::string("\"") + kMontage1020[static_cast<std::size_t>(c)].name + "\"";
  }
  return s + "]";
}

}  // namespace

std::vector<float> EpochDataset::as_floats(std::size_t i) const {
  if (spikes) {
    const auto& t = trains[i];
    std::vector<float> out(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) out[k] = static_cast<float>(t[k]);
    return out;
  }
  return epochs[i];
}

std::string EpochDataset::hash() const {
  Fnv1a64 h;
  const std::int32_t n = static_cast<std::int32_t>(size());
  h.update(&n, sizeof n);
  for (std::size_t i = 0; i < size(); ++i) {
    const std::int32_t lab = labels[i];
    h.update(&lab, sizeof lab);
    if (spikes)
      h.update(trains[i].data(), trains[i].size());
    else
      h.update(epochs[i].data(), epochs[i].size() * sizeof(float));
  }
  return h.hex();
}

void write_recording_dir(const std::string& dir, const std::vector<EegRecording>& trials) {
  fs::create_directories(dir);
  char name[64];
  for (const auto& rec : trials) {
    std::snprintf(name, sizeof name, "trial_%04d.ntsr", rec.trial_id);
    std::vector<float> payload(rec.data.size());
    for (std::size_t i = 0; i < rec.data.size(); ++i) payload[i] = static_cast<float>(rec.data[i]);
    write_ntsr((fs::path(dir) / name).string(), {kNumChannels, static_cast<int>(rec.samples)},
               payload.data());

    json j;
    j["fs"] = rec.fs;
    j["participant"] = rec.participant;
    j["trial_id"] = rec.trial_id;
    j["markers"] = json::array();
    for (const auto& mk : rec.markers)
      j["markers"].push_back({{"label", mk.label}, {"sample", mk.sample}});
    std::snprintf(name, sizeof name, "trial_%04d.json", rec.trial_id);
    write_text_file(fs::path(dir) / name, j.dump(2) + "\n");
  }
  json summary;
  summary["n_trials"] = trials.size();
  summary["channel_order"] = json::parse(channel_order_json());
  summary["version"] = kLibraryVersion;
  write_text_file(fs::path(dir) / "dataset.json", summary.dump(2) + "\n");
}

std::vector<EegRecording> read_recording_dir(const std::string& dir,
                                             std::vector<std::string>* bad_files) {
  std::vector<fs::path> metas;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto p = e.path();
    if (p.extension() == ".json" && p.filename().string().rfind("trial_", 0) == 0)
      metas.push_back(p);
  }
  std::sort(metas.begin(), metas.end());
  if (metas.empty()) throw std::runtime_error("no trial_*.json files in " + dir);

  std::vector<EegRecording> trials;
  for (const auto& meta : metas) {
    try {
      json j = read_json_file(meta);
      EegRecording rec;
      rec.fs = j.at("fs").get<double>();
      rec.participant = j.value("participant", 0);
      rec.trial_id = j.value("trial_id", 0);
      for (const auto& mk : j.at("markers"))
        rec.markers.push_back({mk.at("label").get<std::string>(), mk.at("sample").get<long>()});

      fs::path tensor = meta;
      tensor.replace_extension(".ntsr");
      std::vector<int> shape;
      std::vector<float> payload;
      read_ntsr(tensor.string(), shape, payload);
      if (shape.size() != 2 || shape[0] != kNumChannels)
        throw std::runtime_error(tensor.string() + ": expected [19,T] tensor");
      rec.samples = shape[1];
      rec.data.resize(payload.size());
      for (std::size_t i = 0; i < payload.size(); ++i) rec.data[i] = static_cast<double>(payload[i]);
      trials.push_back(std::move(rec));
    } catch (const std::exception& ex) {
      if (!bad_files) throw;
      bad_files->push_back(meta.filename().string() + ": " + ex.what());
    }
  }
  return trials;
}

void write_epoch_dataset(const std::string& dir, const EpochDataset& ds,
                         const std::string& params_json) {
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = kLibraryVersion;
  manifest["channels"] = ds.channels;
  manifest["length"] = ds.length;
  manifest["payload"] = ds.spikes ? "SPKT" : "NTSR";
  if (ds.spikes) manifest["spike_threshold"] = ds.spike_threshold;
  manifest["channel_order"] = json::parse(channel_order_json());
  manifest["params"] = params_json.empty() ? json::object() : json::parse(params_json);
  manifest["epochs"] = json::array();

  char name[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::snprintf(name, sizeof name, ds.spikes ? "epoch_%05zu.spkt" : "epoch_%05zu.ntsr", i);
    const std::vector<int> shape{ds.channels, static_cast<int>(ds.length)};
    if (ds.spikes)
      write_spkt((fs::path(dir) / name).string(), shape, ds.trains[i].data());
    else
      write_ntsr((fs::path(dir) / name).string(), shape, ds.epochs[i].data());
    manifest["epochs"].push_back({{"file", name},
                                  {"label", ds.labels[i]},
                                  {"trial_id", ds.trial_ids[i]},
                                  {"participant", ds.participants[i]}});
  }
  manifest["hash"] = ds.hash();
  write_text_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

EpochDataset read_epoch_dataset(const std::string& dir) {
  json manifest = read_json_file(fs::path(dir) / "manifest.json");
  EpochDataset ds;
  ds.channels = manifest.at("channels").get<int>();
  ds.length = manifest.at("length").get<long>();
  ds.spikes = manifest.at("payload").get<std::string>() == "SPKT";
  if (ds.spikes) ds.spike_threshold = manifest.value("spike_threshold", 0.0);
  for (const auto& e : manifest.at("epochs")) {
    const std::string file = e.at("file").get<std::string>();
    std::vector<int> shape;
    if (ds.spikes) {
      std::vector<std::uint8_t> payload;
      read_spkt((fs::path(dir) / file).string(), shape, payload);
      ds.trains.push_back(std::move(payload));
    } else {
      std::vector<float> payload;
      read_ntsr((fs::path(dir) / file).string(), shape, payload);
      ds.epochs.push_back(std::move(payload));
    }
    if (shape.size() != 2 || shape[0] != ds.channels || shape[1] != ds.length)
      throw std::runtime_error(file + ": epoch shape does not match manifest");
    ds.labels.push_back(e.at("label").get<int>());
    ds.trial_ids.push_back(e.value("trial_id", 0));
    ds.participants.push_back(e.value("participant", 0));
  }
  return ds;
}

EpochDataset preprocess(const std::vector<EegRecording>& trials, const PreprocessConfig& config,
                        PreprocessStats* stats) {
  PreprocessStats local;
  PreprocessStats& st = stats ? *stats : local;
  st = PreprocessStats{};
  st.trials_in = static_cast<int>(trials.size());

  const long pad = config.effective_pad();
  FirFilter filter;
  bool have_filter = config.high_hz > 0.0;
  if (have_filter)
    filter = FirFilter::design_bandpass(trials.empty() ? 500.0 : trials.front().fs, config.low_hz,
                                        config.high_hz, config.transition_hz);

  EpochDataset ds;
  ds.length = pad;
  for (const auto& trial : trials) {
    EegRecording rec = trial;
    try {
      if (have_filter) {
        if (rec.fs != filter.fs)
          filter = FirFilter::design_bandpass(rec.fs, config.low_hz, config.high_hz,
                                              config.transition_hz);
        fir_bandpass(rec, filter);
      }
      if (config.decimate > 1) decimate_recording(rec, config.decimate);
      auto epochs = segment_epochs(rec);
      for (auto& ep : epochs) {
        ++st.epochs_total;
        auto clean = reject_artifacts(ep, config.artifacts);
        st.periods_excised += clean.excised_periods;
        if (!clean.kept) {
          ++st.epochs_dropped;
          continue;
        }
        st.channels_interpolated += clean.bad_channels;
        minmax_normalize(ep);
        zero_pad(ep, pad);
        std::vector<float> payload(ep.data.size());
        for (std::size_t i = 0; i < ep.data.size(); ++i)
          payload[i] = static_cast<float>(ep.data[i]);
        ds.epochs.push_back(std::move(payload));
        ds.labels.push_back(ep.label);
        ds.trial_ids.push_back(ep.trial_id);
        ds.participants.push_back(ep.participant);
      }
    } catch (const std::exception& ex) {
      ++st.trials_rejected;
      st.diagnostics.push_back(ex.what());
    }
  }
  return ds;
}

EpochDataset encode_dataset(const EpochDataset& ds, double threshold, double* density) {
  if (ds.spikes) throw std::invalid_argument("encode_dataset: input is already a spike dataset");
  EpochDataset out;
  out.channels = ds.channels;
  out.length = ds.length;
  out.spikes = true;
  out.spike_threshold = threshold;
  out.labels = ds.labels;
  out.trial_ids = ds.trial_ids;
  out.participants = ds.participants;

  std::uint64_t ones = 0, total = 0;
  Epoch ep;
  ep.length = ds.length;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ep.data.assign(ds.epochs[i].begin(), ds.epochs[i].end());
    auto train = delta_modulate(ep, threshold);
    for (auto b : train.data) ones += b;
    total += train.data.size();
    out.trains.push_back(std::move(train.data));
  }
  if (density) *density = total ? static_cast<double>(ones) / static_cast<double>(total) : 0.0;
  return out;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace neurospike
