#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "neurospike/datasets.hpp"
#include "neurospike/harness.hpp"
#include "neurospike/ntsr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neurospike;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 1;
  int jobs = 1;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Every command echoes its fully resolved configuration next to its outputs.
void write_run_json(const std::string& out_dir, const std::string& command, const json& config) {
  json j;
  j["command"] = command;
  j["config"] = config;
  j["version"] = kLibraryVersion;
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "run.json", j.dump(2) + "\n");
}

json train_config_json(const TrainConfig& cfg) {
  return json{{"folds", cfg.folds},
              {"max_epochs", cfg.max_epochs},
              {"patience", cfg.patience},
              {"improvement_tol", cfg.improvement_tol},
              {"batch", cfg.batch},
              {"lr", cfg.lr},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"eps", cfg.eps},
              {"seed", cfg.seed},
              {"jobs", cfg.jobs},
              {"paired_ttest", cfg.paired_ttest},
              {"steps", cfg.csnn.steps},
              {"lif_beta", cfg.csnn.beta},
              {"lif_theta", cfg.csnn.theta},
              {"surrogate_slope", cfg.csnn.k}};
}

void add_train_options(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--folds", cfg.folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--max-epochs", cfg.max_epochs, "Training epoch cap per fold")->capture_default_str();
  cmd->add_option("--patience", cfg.patience, "Early-stopping patience (epochs)")->capture_default_str();
  cmd->add_option("--batch", cfg.batch, "Mini-batch size")->capture_default_str();
  cmd->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--beta1", cfg.beta1, "Adam beta1")->capture_default_str();
  cmd->add_option("--beta2", cfg.beta2, "Adam beta2")->capture_default_str();
  cmd->add_option("--eps", cfg.eps, "Adam epsilon")->capture_default_str();
  cmd->add_option("--steps", cfg.csnn.steps, "CSNN presentation steps")->capture_default_str();
  cmd->add_option("--decay", cfg.csnn.beta, "LIF membrane decay rate")->capture_default_str();
  cmd->add_option("--vthresh", cfg.csnn.theta, "LIF spiking threshold")->capture_default_str();
  cmd->add_option("--slope", cfg.csnn.k, "Surrogate gradient slope k")->capture_default_str();
  cmd->add_flag("--paired", cfg.paired_ttest, "Use paired t-tests instead of Welch");
}

int report_outputs(const ExperimentReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "report.json", report.to_json());
  write_file(fs::path(out_dir) / "report.csv", report.to_csv());
  std::cout << report.to_csv();
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neurospike: EEG braking-intention decoding with spiking, convolutional "
               "and graph neural networks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file");

  GlobalOptions global;
  if (const char* env_seed = std::getenv("NEUROSPIKE_SEED"))
    global.seed = std::strtoull(env_seed, nullptr, 10);
  app.add_option("--seed", global.seed, "Root seed (env NEUROSPIKE_SEED)")->capture_default_str();
  app.add_option("--jobs", global.jobs, "Parallel workers across folds/thresholds")
      ->capture_default_str();

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate a synthetic braking-intention dataset");
  SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--trials", synth_cfg.n_trials, "Number of trials")->capture_default_str();
  synth->add_option("--noise", synth_cfg.noise_std, "White-noise sigma (uV)")->capture_default_str();
  synth->add_option("--ramp", synth_cfg.ramp_amplitude, "CNV ramp amplitude (uV)")
      ->capture_default_str();
  synth->add_option("--fs", synth_cfg.fs, "Sampling rate (Hz)")->capture_default_str();
  synth->add_option("--spacing", synth_cfg.marker_spacing, "Countdown marker spacing (s)")
      ->capture_default_str();
  synth->add_option("--jitter", synth_cfg.marker_jitter, "Marker jitter (samples)")
      ->capture_default_str();
  synth->add_option("-o,--out", synth_out, "Output recording directory")->required();

  // --- preprocess ---
  auto* prep = app.add_subcommand("preprocess", "Run the filtering/epoching/cleaning pipeline");
  PreprocessConfig prep_cfg;
  std::string prep_in, prep_out;
  prep->add_option("input", prep_in, "Recording directory")->required();
  prep->add_option("-o,--out", prep_out, "Output epoch dataset directory")->required();
  prep->add_option("--low", prep_cfg.low_hz, "Bandpass low edge (Hz)")->capture_default_str();
  prep->add_option("--high", prep_cfg.high_hz, "Bandpass high edge (Hz); 0 disables filtering")
      ->capture_default_str();
  prep->add_option("--transition", prep_cfg.transition_hz, "FIR transition width (Hz)")
      ->capture_default_str();
  prep->add_option("--decimate", prep_cfg.decimate, "Keep every Nth sample after filtering")
      ->capture_default_str();
  prep->add_option("--pad-len", prep_cfg.pad_length,
                   "Pad target length (default 1848/decimate)");
  prep->add_option("--amp-limit", prep_cfg.artifacts.amplitude_limit,
                   "Artifact amplitude limit (uV)")
      ->capture_default_str();
  prep->add_option("--bad-frac", prep_cfg.artifacts.duration_fraction,
                   "Fraction of epoch over limit that marks a channel bad")
      ->capture_default_str();
  prep->add_option("--max-bad", prep_cfg.artifacts.max_bad_channels,
                   "Epochs with more bad channels than this are dropped")
      ->capture_default_str();

  // --- encode ---
  auto* enc = app.add_subcommand("encode", "Delta-modulate a preprocessed dataset into spike trains");
  double enc_threshold = 0.5;
  std::string enc_in, enc_out;
  enc->add_option("input", enc_in, "Epoch dataset directory")->required();
  enc->add_option("-o,--out", enc_out, "Output spike dataset directory")->required();
  enc->add_option("--threshold", enc_threshold, "Delta-modulation threshold")->capture_default_str();

  // --- train / compare / sweep ---
  TrainConfig train_cfg;
  auto* train = app.add_subcommand("train", "Cross-validate one model");
  std::string train_in, train_out, train_model_name = "csnn";
  train->add_option("input", train_in, "Dataset directory")->required();
  train->add_option("-o,--out", train_out, "Report directory")->required();
  train->add_option("--model", train_model_name, "Model: csnn, cnn, gcn, gcs, gin")
      ->capture_default_str();
  add_train_options(train, train_cfg);

  auto* compare = app.add_subcommand("compare", "Cross-validate several models; t-tests vs the first");
  std::string cmp_in, cmp_out, cmp_models = "csnn,cnn,gcn,gcs,gin";
  compare->add_option("input", cmp_in, "Dataset directory")->required();
  compare->add_option("-o,--out", cmp_out, "Report directory")->required();
  compare->add_option("--models", cmp_models, "Comma-separated model list")->capture_default_str();
  add_train_options(compare, train_cfg);

  auto* sweep = app.add_subcommand("sweep", "Delta-modulation threshold sweep with the CSNN");
  std::string swp_in, swp_out, swp_thresholds = "0.05,0.25,0.375,0.5,0.625,0.75,1";
  sweep->add_option("input", swp_in, "Floating-point epoch dataset directory")->required();
  sweep->add_option("-o,--out", swp_out, "Report directory")->required();
  sweep->add_option("--thresholds", swp_thresholds, "Comma-separated threshold list")
      ->capture_default_str();
  add_train_options(sweep, train_cfg);

  // --- inspect ---
  auto* inspect = app.add_subcommand("inspect", "Summarize a dataset directory or report");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "Dataset directory or report.json")->required();

  CLI11_PARSE(app, argc, argv);

  train_cfg.seed = global.seed;
  train_cfg.jobs = global.jobs;
  synth_cfg.seed = global.seed;

  try {
    if (*synth) {
      auto trials = synthesize_cnv_dataset(synth_cfg);
      write_recording_dir(synth_out, trials);
      write_run_json(synth_out, "synth",
                     json{{"trials", synth_cfg.n_trials},
                          {"noise_std", synth_cfg.noise_std},
                          {"ramp_amplitude", synth_cfg.ramp_amplitude},
                          {"fs", synth_cfg.fs},
                          {"marker_spacing", synth_cfg.marker_spacing},
                          {"marker_jitter", synth_cfg.marker_jitter},
                          {"seed", synth_cfg.seed}});
      long samples = 0;
      for (const auto& t : trials) samples += t.samples;
      std::cout << "wrote " << trials.size() << " trials (" << samples << " samples total) to "
                << synth_out << "\n";
      return 0;
    }

    if (*prep) {
      std::vector<std::string> bad;
      auto trials = read_recording_dir(prep_in, &bad);
      PreprocessStats stats;
      auto ds = preprocess(trials, prep_cfg, &stats);
      json params{{"low_hz", prep_cfg.low_hz},
                  {"high_hz", prep_cfg.high_hz},
                  {"transition_hz", prep_cfg.transition_hz},
                  {"decimate", prep_cfg.decimate},
                  {"pad_length", prep_cfg.effective_pad()},
                  {"amplitude_limit", prep_cfg.artifacts.amplitude_limit},
                  {"duration_fraction", prep_cfg.artifacts.duration_fraction},
                  {"max_bad_channels", prep_cfg.artifacts.max_bad_channels},
                  {"trials_in", stats.trials_in},
                  {"trials_rejected", stats.trials_rejected},
                  {"epochs_total", stats.epochs_total},
                  {"epochs_dropped", stats.epochs_dropped},
                  {"channels_interpolated", stats.channels_interpolated},
                  {"periods_excised", stats.periods_excised},
                  {"malformed_files", bad}};
      write_epoch_dataset(prep_out, ds, params.dump());
      write_run_json(prep_out, "preprocess", params);
      std::cout << "epochs kept: " << ds.size() << " of " << stats.epochs_total << " ("
                << stats.epochs_dropped << " dropped, " << stats.trials_rejected
                << " trials rejected)\n";
      for (const auto& b : bad) std::cerr << "warning: skipped " << b << "\n";
      if (!bad.empty()) std::cerr << "warning count: " << bad.size() << "\n";
      return 0;
    }

    if (*enc) {
      auto ds = read_epoch_dataset(enc_in);
      if (ds.spikes) throw CLI::ValidationError("encode", "input is already a spike dataset");
      double density = 0.0;
      auto spikes = encode_dataset(ds, enc_threshold, &density);
      json params{{"threshold", enc_threshold}, {"source", enc_in}, {"spike_density", density}};
      write_epoch_dataset(enc_out, spikes, params.dump());
      write_run_json(enc_out, "encode", params);
      std::cout << "threshold " << enc_threshold << ": mean spike density " << density << "\n";
      return 0;
    }

    if (*train || *compare || *sweep) {
      const std::string in = *train ? train_in : (*compare ? cmp_in : swp_in);
      const std::string out = *train ? train_out : (*compare ? cmp_out : swp_out);
      auto ds = read_epoch_dataset(in);
      json cfg_json = train_config_json(train_cfg);
      cfg_json["dataset"] = in;

      ExperimentReport report;
      if (*train) {
        cfg_json["models"] = json::array({train_model_name});
        report = run_comparison(ds, {train_model_name}, train_cfg);
      } else if (*compare) {
        auto names = split_list(cmp_models);
        if (names.empty()) throw CLI::ValidationError("compare", "empty model list");
        cfg_json["models"] = names;
        report = run_comparison(ds, names, train_cfg);
      } else {
        std::vector<double> thetas;
        for (const auto& s : split_list(swp_thresholds)) thetas.push_back(std::stod(s));
        if (thetas.empty()) throw CLI::ValidationError("sweep", "empty threshold list");
        cfg_json["thresholds"] = thetas;
        report = run_threshold_sweep(ds, thetas, train_cfg);
      }
      report.config_json = cfg_json.dump();
      write_run_json(out, *train ? "train" : (*compare ? "compare" : "sweep"), cfg_json);
      return report_outputs(report, out);
    }

    if (*inspect) {
      if (fs::is_directory(inspect_path)) {
        auto ds = read_epoch_dataset(inspect_path);
        long n1 = 0;
        for (int l : ds.labels) n1 += l;
        std::cout << "epoch dataset: " << ds.size() << " epochs of [" << ds.channels << ","
                  << ds.length << "] (" << (ds.spikes ? "spike" : "float") << ")\n"
                  << "labels: " << ds.size() - static_cast<std::size_t>(n1) << " class-0, " << n1
                  << " class-1\n"
                  << "hash: " << ds.hash() << "\n";
        if (ds.spikes) std::cout << "threshold: " << ds.spike_threshold << "\n";
      } else {
        std::ifstream in(inspect_path);
        if (!in) throw std::runtime_error("cannot open " + inspect_path);
        json j;
        in >> j;
        std::cout << "report seed " << j.value("seed", 0ull) << ", dataset "
                  << j.value("dataset_hash", std::string("?")) << "\n";
        for (const auto& m : j.at("models"))
          std::cout << "  " << m.at("name").get<std::string>() << ": acc "
                    << m.at("mean").at("acc").get<double>() << " (sd "
                    << m.at("sd").at("acc").get<double>() << ")\n";
      }
      return 0;
    }
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
