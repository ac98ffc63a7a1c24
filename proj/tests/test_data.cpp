// Signal windowing, normalization, reference splits, synthetic generation,
// persistence, and manifest ingestion.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "gtnp/dataset.hpp"
#include "gtnp/errors.hpp"
#include "gtnp/random.hpp"

using namespace gtnp;
namespace fs = std::filesystem;

static fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("gtnp_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

static std::vector<double> ramp(int n) {
  std::vector<double> s(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<size_t>(i)] = i;
  return s;
}

TEST_CASE("window_signal slices non-overlapping row-major windows") {
  auto two = window_signal(ramp(2048), 1024, 32);
  REQUIRE(two.size() == 2);
  CHECK(two[0].dim(0) == 32);
  CHECK(two[0].dim(1) == 32);
  CHECK(two[0].at(0, 0) == 0.0);
  CHECK(two[0].at(0, 31) == 31.0);
  CHECK(two[0].at(1, 0) == 32.0);
  CHECK(two[1].at(0, 0) == 1024.0);

  CHECK(window_signal(ramp(1023), 1024, 32).empty());
  CHECK(window_signal({}, 1024, 32).empty());

  // Remainders are dropped: count is always floor(len / window).
  RandomStream rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    int len = rng.uniform_int(0, 130);
    auto ws = window_signal(ramp(len), 16, 4);
    CHECK(static_cast<int>(ws.size()) == len / 16);
  }

  CHECK_THROWS_AS(window_signal(ramp(64), 10, 4), data_error);
  CHECK_THROWS_AS(window_signal(ramp(64), 0, 4), data_error);
}

static DomainDataset tiny_dataset(int n, int h, int w, uint64_t seed) {
  DomainDataset ds;
  ds.height = h;
  ds.width = w;
  ds.class_count = 2;
  ds.label_space = 2;
  RandomStream rng(seed);
  for (int i = 0; i < n; ++i) {
    LabeledSample s;
    s.matrix = rng.normal_tensor({h, w}, 3.0);
    s.label = i % 2;
    s.id = i;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

TEST_CASE("normalization zero-means and unit-scales training features") {
  DomainDataset ds = tiny_dataset(40, 3, 4, 5);
  // A constant feature goes to all zeros after centering.
  for (auto& s : ds.samples) s.matrix.at(0, 0) = 7.5;
  normalize_fit(ds);
  REQUIRE(ds.norm.has_value());

  int d = ds.feature_count();
  for (int j = 0; j < d; ++j) {
    double m = 0.0, v = 0.0;
    for (const auto& s : ds.samples) m += s.matrix.data[static_cast<size_t>(j)];
    m /= static_cast<double>(ds.samples.size());
    for (const auto& s : ds.samples) {
      double diff = s.matrix.data[static_cast<size_t>(j)] - m;
      v += diff * diff;
    }
    v /= static_cast<double>(ds.samples.size());
    CHECK(std::abs(m) < 1e-9);
    if (j == 0)
      CHECK(v == 0.0);  // the constant column
    else
      CHECK(std::abs(std::sqrt(v) - 1.0) < 1e-6);
  }
}

TEST_CASE("stored statistics transform held-out data without refitting") {
  DomainDataset train = tiny_dataset(30, 2, 3, 9);
  normalize_fit(train);
  NormStats stats = *train.norm;

  DomainDataset heldout = tiny_dataset(10, 2, 3, 10);
  DomainDataset raw = heldout;
  apply_normalization(heldout, stats);
  for (size_t i = 0; i < heldout.samples.size(); ++i)
    for (size_t j = 0; j < heldout.samples[i].matrix.data.size(); ++j) {
      double expect = (raw.samples[i].matrix.data[j] - stats.mean[j]) / stats.stddev[j];
      CHECK(heldout.samples[i].matrix.data[j] == expect);
    }

  // Round trip through denormalize recovers the raw values.
  Tensor back = denormalize(heldout.samples[0].matrix, stats);
  for (size_t j = 0; j < back.data.size(); ++j)
    CHECK(std::abs(back.data[j] - raw.samples[0].matrix.data[j]) < 1e-9);

  NormStats wrong;
  wrong.mean = {0.0};
  wrong.stddev = {1.0};
  CHECK_THROWS_AS(apply_normalization(heldout, wrong), shape_error);
}

TEST_CASE("reference split partitions the training samples") {
  DomainDataset ds = tiny_dataset(20, 2, 2, 3);
  ds.samples[3].set = SetTag::Test;
  ds.samples[11].set = SetTag::Test;

  RandomStream rng = derive_stream(42, "split");
  split_reference(ds, 7, rng);
  auto r = ds.indices_with(SetTag::Reference);
  auto m = ds.indices_with(SetTag::Modeling);
  CHECK(r.size() == 7);
  CHECK(m.size() == 11);
  std::set<int> all(r.begin(), r.end());
  all.insert(m.begin(), m.end());
  CHECK(all.size() == 18);
  CHECK(all.count(3) == 0);
  CHECK(all.count(11) == 0);

  // Same seed reproduces the same partition.
  DomainDataset ds2 = tiny_dataset(20, 2, 2, 3);
  ds2.samples[3].set = SetTag::Test;
  ds2.samples[11].set = SetTag::Test;
  RandomStream rng2 = derive_stream(42, "split");
  split_reference(ds2, 7, rng2);
  for (size_t i = 0; i < ds.samples.size(); ++i) CHECK(ds.samples[i].set == ds2.samples[i].set);

  // n_ref equal to the training count leaves the modeling set empty.
  RandomStream rng3 = derive_stream(1, "split");
  split_reference(ds, 18, rng3);
  CHECK(ds.indices_with(SetTag::Modeling).empty());
  CHECK_THROWS_AS(split_reference(ds, 19, rng3), data_error);
}

TEST_CASE("synthetic generation covers both domains and label layouts") {
  SynthConfig cfg;
  cfg.class_count = 3;
  cfg.height = 4;
  cfg.width = 4;
  cfg.samples_per_class_source = 5;
  cfg.samples_per_class_target = 7;
  cfg.noise_std = 0.05;
  cfg.seed = 21;
  auto [src, tgt] = synth_generate(cfg);
  CHECK(src.samples.size() == 15);
  CHECK(tgt.samples.size() == 21);
  CHECK(src.class_count == 3);
  CHECK(src.label_space == 3);
  src.validate();
  tgt.validate();

  // The generator is bit-reproducible under a fixed seed.
  auto [src2, tgt2] = synth_generate(cfg);
  for (size_t i = 0; i < src.samples.size(); ++i)
    for (size_t j = 0; j < src.samples[i].matrix.data.size(); ++j)
      CHECK(src.samples[i].matrix.data[j] == src2.samples[i].matrix.data[j]);
  for (size_t i = 0; i < tgt.samples.size(); ++i)
    for (size_t j = 0; j < tgt.samples[i].matrix.data.size(); ++j)
      CHECK(tgt.samples[i].matrix.data[j] == tgt2.samples[i].matrix.data[j]);
}

TEST_CASE("emerging-class mode keeps one class target-only") {
  SynthConfig cfg;
  cfg.class_count = 4;
  cfg.height = 3;
  cfg.width = 4;
  cfg.samples_per_class_source = 4;
  cfg.samples_per_class_target = 4;
  cfg.emerging_class = true;
  cfg.seed = 8;
  auto [src, tgt] = synth_generate(cfg);

  std::set<int> src_labels, tgt_labels;
  for (const auto& s : src.samples) src_labels.insert(s.label);
  for (const auto& s : tgt.samples) tgt_labels.insert(s.label);
  CHECK(src_labels == std::set<int>({1, 2, 3}));
  CHECK(tgt_labels == std::set<int>({0, 1, 2, 3}));
  CHECK(src.class_count == 3);
  CHECK(src.label_space == 4);
  CHECK(tgt.class_count == 4);
}

TEST_CASE("identity shift with zero noise duplicates the source domain") {
  SynthConfig cfg;
  cfg.class_count = 2;
  cfg.height = 2;
  cfg.width = 3;
  cfg.samples_per_class_source = 3;
  cfg.samples_per_class_target = 3;
  cfg.noise_std = 0.0;
  cfg.seed = 77;
  auto [src, tgt] = synth_generate(cfg);
  REQUIRE(src.samples.size() == tgt.samples.size());
  for (size_t i = 0; i < src.samples.size(); ++i) {
    CHECK(src.samples[i].label == tgt.samples[i].label);
    for (size_t j = 0; j < src.samples[i].matrix.data.size(); ++j)
      CHECK(src.samples[i].matrix.data[j] == tgt.samples[i].matrix.data[j]);
  }
}

TEST_CASE("offset shift moves per-class sample means by the offset") {
  SynthConfig cfg;
  cfg.class_count = 2;
  cfg.height = 4;
  cfg.width = 4;
  cfg.samples_per_class_source = 50;
  cfg.samples_per_class_target = 50;
  cfg.noise_std = 0.1;
  cfg.shift.offset = 1.0;
  cfg.seed = 101;
  auto [src, tgt] = synth_generate(cfg);

  int d = src.feature_count();
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<double> ms(static_cast<size_t>(d), 0.0), mt(static_cast<size_t>(d), 0.0);
    int ns = 0, nt = 0;
    for (const auto& s : src.samples)
      if (s.label == cls) {
        ++ns;
        for (int j = 0; j < d; ++j) ms[static_cast<size_t>(j)] += s.matrix.data[static_cast<size_t>(j)];
      }
    for (const auto& s : tgt.samples)
      if (s.label == cls) {
        ++nt;
        for (int j = 0; j < d; ++j) mt[static_cast<size_t>(j)] += s.matrix.data[static_cast<size_t>(j)];
      }
    for (int j = 0; j < d; ++j)
      CHECK(std::abs(mt[static_cast<size_t>(j)] / nt - ms[static_cast<size_t>(j)] / ns - 1.0) < 0.05);
  }
}

TEST_CASE("shift transform rotates coordinate pairs then scales and offsets") {
  std::vector<double> x = {1.0, 0.0, 2.0, 0.0};
  ShiftDescriptor sh;
  sh.rotation_deg = 90.0;
  sh.scale = 2.0;
  sh.offset = 0.5;
  apply_shift(x, sh);
  CHECK(std::abs(x[0] - 0.5) < 1e-12);  // (1,0) -> (0,1), then *2 + 0.5
  CHECK(std::abs(x[1] - 2.5) < 1e-12);
  CHECK(std::abs(x[2] - 0.5) < 1e-12);
  CHECK(std::abs(x[3] - 4.5) < 1e-12);
}

TEST_CASE("prototypes carry a rotation-sensitive class code") {
  SynthConfig cfg;
  cfg.class_count = 4;
  cfg.height = 8;
  cfg.width = 8;
  cfg.seed = 7;
  auto protos = synth_prototypes(cfg);
  REQUIRE(protos.size() == 4);

  // Every class pair sits at a phase-code distance; adjacent classes are the
  // closest, and distances grow with class index separation.
  auto dist = [&](int a, int b) {
    double s = 0.0;
    for (size_t j = 0; j < protos[0].size(); ++j) {
      double diff = protos[static_cast<size_t>(a)][j] - protos[static_cast<size_t>(b)][j];
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  CHECK(dist(0, 1) < dist(0, 2));
  CHECK(dist(0, 2) < dist(0, 3));
  CHECK(dist(1, 2) < dist(1, 3));

  // Rotating a prototype by the class phase step lands near the next class:
  // the code lives in exactly the planes the domain shift acts on.
  std::vector<double> rotated = protos[0];
  ShiftDescriptor sh;
  sh.rotation_deg = 40.0;
  apply_shift(rotated, sh);
  double to_next = 0.0, to_own = 0.0;
  for (size_t j = 0; j < rotated.size(); ++j) {
    double dn = rotated[j] - protos[1][j];
    double doo = rotated[j] - protos[0][j];
    to_next += dn * dn;
    to_own += doo * doo;
  }
  CHECK(to_next < to_own);

  // Explicit prototypes override the generated code.
  SynthConfig ex;
  ex.class_count = 2;
  ex.height = 1;
  ex.width = 2;
  ex.prototypes = {{1.0, 2.0}, {3.0, 4.0}};
  auto protos2 = synth_prototypes(ex);
  CHECK(protos2[0][0] == 1.0);
  CHECK(protos2[1][1] == 4.0);
  ex.prototypes = {{1.0, 2.0}};
  CHECK_THROWS_AS(synth_prototypes(ex), config_error);
  ex.prototypes = {{1.0}, {2.0}};
  CHECK_THROWS_AS(synth_prototypes(ex), config_error);
}

TEST_CASE("dataset persistence round-trips samples and metadata") {
  fs::path dir = temp_dir("persist");
  SynthConfig cfg;
  cfg.class_count = 3;
  cfg.height = 4;
  cfg.width = 5;
  cfg.samples_per_class_source = 4;
  cfg.samples_per_class_target = 2;
  cfg.seed = 33;
  auto [src, tgt] = synth_generate(cfg);
  normalize_fit(src);
  save_dataset(src, (dir / "src").string(), "{\"note\": 1}");

  DomainDataset back = load_dataset((dir / "src").string());
  CHECK(back.height == 4);
  CHECK(back.width == 5);
  CHECK(back.class_count == 3);
  CHECK(back.domain == Domain::Source);
  REQUIRE(back.norm.has_value());
  REQUIRE(back.samples.size() == src.samples.size());
  for (size_t i = 0; i < back.samples.size(); ++i) {
    CHECK(back.samples[i].label == src.samples[i].label);
    for (size_t j = 0; j < back.samples[i].matrix.data.size(); ++j)
      CHECK(back.samples[i].matrix.data[j] == src.samples[i].matrix.data[j]);
  }
  for (size_t j = 0; j < back.norm->mean.size(); ++j) {
    CHECK(back.norm->mean[j] == src.norm->mean[j]);
    CHECK(back.norm->stddev[j] == src.norm->stddev[j]);
  }

  CHECK_THROWS_AS(load_dataset((dir / "missing").string()), data_error);
  fs::remove_all(dir);
}

TEST_CASE("manifest ingestion windows signals and groups by condition") {
  fs::path dir = temp_dir("manifest");
  auto write_signal = [&](const std::string& name, int n, double scale) {
    std::ofstream f(dir / name);
    for (int i = 0; i < n; ++i) f << scale * i << "\n";
  };
  write_signal("a0.txt", 40, 1.0);   // 2 windows of 16
  write_signal("a1.txt", 16, 2.0);   // 1 window
  write_signal("b0.txt", 35, 1.0);   // 2 windows
  {
    std::ofstream f(dir / "manifest.json");
    f << R"({"window": 16, "side": 4, "signals": [
      {"path": "a0.txt", "condition": "A", "class": 0},
      {"path": "a1.txt", "condition": "A", "class": 1},
      {"path": "b0.txt", "condition": "B", "class": 0}]})";
  }

  Manifest m = load_manifest((dir / "manifest.json").string());
  CHECK(m.window == 16);
  CHECK(m.side == 4);
  REQUIRE(m.signals.size() == 3);

  auto by_cond = prepare_from_manifest(m, dir.string());
  REQUIRE(by_cond.count("A") == 1);
  REQUIRE(by_cond.count("B") == 1);
  CHECK(by_cond["A"].samples.size() == 3);
  CHECK(by_cond["B"].samples.size() == 2);
  CHECK(by_cond["A"].height == 4);
  CHECK(by_cond["A"].width == 4);
  CHECK(by_cond["A"].class_count == 2);
  CHECK(by_cond["A"].samples[0].matrix.at(0, 0) == 0.0);
  CHECK(by_cond["A"].samples[0].matrix.at(0, 3) == 3.0);
  CHECK(by_cond["A"].samples[1].matrix.at(0, 0) == 16.0);
  CHECK(by_cond["A"].samples[2].label == 1);
  CHECK(by_cond["A"].samples[2].matrix.at(0, 1) == 2.0);

  // Signals shorter than one window leave their condition empty -> error.
  write_signal("c0.txt", 5, 1.0);
  {
    std::ofstream f(dir / "manifest.json");
    f << R"({"window": 16, "side": 4, "signals": [
      {"path": "c0.txt", "condition": "C", "class": 0}]})";
  }
  Manifest m2 = load_manifest((dir / "manifest.json").string());
  CHECK_THROWS_AS(prepare_from_manifest(m2, dir.string()), data_error);

  CHECK_THROWS_AS(load_manifest((dir / "nope.json").string()), data_error);
  {
    std::ofstream f(dir / "bad.json");
    f << "{\"signals\": []}";
  }
  CHECK_THROWS_AS(load_manifest((dir / "bad.json").string()), data_error);
  fs::remove_all(dir);
}
