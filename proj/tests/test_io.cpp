#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "neurospike/checkpoint.hpp"
#include "neurospike/datasets.hpp"
#include "neurospike/ntsr.hpp"
#include "neurospike/random.hpp"
#include "neurospike/spiking.hpp"
#include "testutil.hpp"

using namespace neurospike;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("neurospike_test_") + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("ntsr round trip across random shapes") {
  TempDir dir("ntsr");
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const int nd = 1 + static_cast<int>(rng.below(4));
    std::vector<int> shape;
    std::size_t count = 1;
    for (int d = 0; d < nd; ++d) {
      shape.push_back(1 + static_cast<int>(rng.below(6)));
      count *= static_cast<std::size_t>(shape.back());
    }
    std::vector<float> data(count);
    for (auto& v : data) v = static_cast<float>(rng.normal());
    const std::string path = (dir.path / "t.ntsr").string();
    write_ntsr(path, shape, data.data());
    std::vector<int> shape2;
    std::vector<float> data2;
    read_ntsr(path, shape2, data2);
    CHECK(shape2 == shape);
    CHECK(data2 == data);
  }
}

TEST_CASE("ntsr header validation") {
  TempDir dir("ntsr_bad");
  const std::string path = (dir.path / "t.ntsr").string();
  std::vector<int> shape{2, 2};
  std::vector<float> data{1, 2, 3, 4};
  write_ntsr(path, shape, data.data());

  // Corrupt the version field.
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(4);
  const char two[4] = {2, 0, 0, 0};
  f.write(two, 4);
  f.close();
  std::vector<int> s;
  std::vector<float> d;
  CHECK_THROWS_WITH_AS(read_ntsr(path, s, d), doctest::Contains("version"), std::runtime_error);

  // Wrong magic.
  std::fstream g(path, std::ios::in | std::ios::out | std::ios::binary);
  g.seekp(0);
  g.write("XXXX", 4);
  g.close();
  CHECK_THROWS_WITH_AS(read_ntsr(path, s, d), doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("spkt round trip with binary payload") {
  TempDir dir("spkt");
  std::vector<int> shape{19, 37};
  std::vector<std::uint8_t> bits(19 * 37);
  Rng rng(5);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.below(2));
  const std::string path = (dir.path / "t.spkt").string();
  write_spkt(path, shape, bits.data());
  std::vector<int> shape2;
  std::vector<std::uint8_t> bits2;
  read_spkt(path, shape2, bits2);
  CHECK(shape2 == shape);
  CHECK(bits2 == bits);
  // NTSR reader refuses SPKT payloads.
  std::vector<float> d;
  CHECK_THROWS(read_ntsr(path, shape2, d));
}

TEST_CASE("recording directory round trip") {
  TempDir dir("rec");
  SynthConfig cfg;
  cfg.n_trials = 3;
  cfg.seed = 21;
  auto trials = synthesize_cnv_dataset(cfg);
  write_recording_dir(dir.path.string(), trials);
  auto loaded = read_recording_dir(dir.path.string());
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].fs == trials[i].fs);
    CHECK(loaded[i].samples == trials[i].samples);
    REQUIRE(loaded[i].markers.size() == 6);
    CHECK(loaded[i].markers[5].label == "STOP");
    // Payload survives the f32 round trip to within float precision.
    for (std::size_t k = 0; k < 100; ++k)
      CHECK(loaded[i].data[k] == doctest::Approx(trials[i].data[k]).epsilon(1e-6));
  }

  std::vector<std::string> bad;
  std::ofstream(dir.path / "trial_9999.json") << "{ not json";
  auto partial = read_recording_dir(dir.path.string(), &bad);
  CHECK(partial.size() == 3);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].find("trial_9999") != std::string::npos);
}

TEST_CASE("epoch dataset round trip: float and spike payloads, stable hash") {
  TempDir dir("eds");
  SynthConfig cfg;
  cfg.n_trials = 2;
  cfg.seed = 31;
  auto trials = synthesize_cnv_dataset(cfg);
  PreprocessConfig pc;
  pc.decimate = 4;
  auto ds = preprocess(trials, pc);
  REQUIRE(ds.size() == 12);

  const auto float_dir = (dir.path / "float").string();
  write_epoch_dataset(float_dir, ds, R"({"note":"test"})");
  auto ds2 = read_epoch_dataset(float_dir);
  CHECK(ds2.size() == ds.size());
  CHECK(ds2.length == ds.length);
  CHECK(ds2.labels == ds.labels);
  CHECK(ds2.hash() == ds.hash());
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds2.epochs[i] == ds.epochs[i]);

  double density = 0.0;
  auto spikes = encode_dataset(ds, 0.1, &density);
  const auto spike_dir = (dir.path / "spike").string();
  write_epoch_dataset(spike_dir, spikes, "{}");
  auto spikes2 = read_epoch_dataset(spike_dir);
  CHECK(spikes2.spikes);
  CHECK(spikes2.spike_threshold == 0.1);
  CHECK(spikes2.hash() == spikes.hash());
  for (std::size_t i = 0; i < spikes.size(); ++i) CHECK(spikes2.trains[i] == spikes.trains[i]);

  // Density equals an independent recount of the stored payload.
  std::uint64_t ones = 0, total = 0;
  for (const auto& t : spikes2.trains) {
    for (auto b : t) ones += b;
    total += t.size();
  }
  CHECK(density == doctest::Approx(static_cast<double>(ones) / static_cast<double>(total)).epsilon(1e-12));
}

TEST_CASE("generic checkpoint and csnn checkpoint round trips") {
  TempDir dir("ckpt");
  Rng rng(41);
  auto w = testutil::random_tensor<float>({3, 4}, rng, -1, 1, false);
  auto b = testutil::random_tensor<float>({3}, rng, -1, 1, false);
  save_checkpoint(dir.path.string(), {{"layer.w", &w}, {"layer.b", &b}}, {{"alpha", 0.25}});
  auto ckpt = load_checkpoint(dir.path.string());
  CHECK(ckpt.tensors.at("layer.w").vec() == w.vec());
  CHECK(ckpt.tensors.at("layer.b").vec() == b.vec());
  CHECK(ckpt.metadata.at("alpha") == 0.25);

  CsnnConfig cfg;
  cfg.conv1_filters = 2;
  cfg.conv2_filters = 3;
  cfg.steps = 7;
  cfg.beta = 0.5;
  cfg.theta = 0.5;
  cfg.k = 0.25;
  Rng mrng(43);
  CsnnModel<float> model(19, 24, cfg, mrng);
  const auto model_dir = (dir.path / "csnn").string();
  save_csnn_checkpoint(model_dir, model);
  auto loaded = load_csnn_checkpoint(model_dir);
  CHECK(loaded.cfg.steps == 7);
  CHECK(loaded.cfg.beta == 0.5);
  CHECK(loaded.cfg.k == 0.25);

  auto x = testutil::random_tensor<float>({19, 24}, mrng, 0.0, 1.0, false);
  auto [r1, c1] = model.forward_sample(x);
  auto [r2, c2] = loaded.forward_sample(x);
  CHECK(r1 == r2);
  CHECK(c1 == c2);
}

TEST_CASE("seed streams: named substreams are independent and reproducible") {
  CHECK(stream_seed(1, "dataset") != stream_seed(1, "init"));
  CHECK(stream_seed(1, "init") != stream_seed(2, "init"));
  CHECK(stream_seed(1, "shuffle", 3) != stream_seed(1, "shuffle", 4));
  CHECK(stream_seed(1, "shuffle", 3) == stream_seed(1, "shuffle", 3));
  Rng a = stream_rng(7, "x", 1), b = stream_rng(7, "x", 1);
  for (int i = 0; i < 16; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("fnv hash is stable across calls") {
  Fnv1a64 h1, h2;
  const char bytes[] = "neurospike";
  h1.update(bytes, sizeof bytes);
  h2.update(bytes, sizeof bytes);
  CHECK(h1.hex() == h2.hex());
  CHECK(h1.hex().size() == 16);
}
