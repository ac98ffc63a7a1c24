#include "gtnp/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "gtnp/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gtnp {

std::string domain_to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

Domain domain_from_string(const std::string& s) {
  if (s == "source") return Domain::Source;
  if (s == "target") return Domain::Target;
  throw data_error("unknown domain '" + s + "'");
}

std::vector<int> DomainDataset::indices_with(SetTag tag) const {
  std::vector<int> out;
  for (size_t i = 0; i < samples.size(); ++i)
    if (samples[i].set == tag) out.push_back(static_cast<int>(i));
  return out;
}

void DomainDataset::validate() const {
  std::set<int> ids;
  for (const LabeledSample& s : samples) {
    if (s.matrix.ndim() != 2 || s.matrix.dim(0) != height || s.matrix.dim(1) != width)
      throw data_error("sample matrix shape mismatch");
    if (s.label < 0 || s.label >= label_space)
      throw data_error("sample label " + std::to_string(s.label) + " outside label space [0," +
                       std::to_string(label_space) + ")");
    if (s.id < 0 || !ids.insert(s.id).second)
      throw data_error("sample ids must be unique and non-negative");
    if (!s.matrix.all_finite()) throw data_error("sample contains non-finite values");
  }
}

std::vector<Tensor> window_signal(const std::vector<double>& signal, int window, int side) {
  if (window <= 0 || side <= 0 || window % side != 0)
    throw data_error("window length must be a positive multiple of the image side");
  int rows = side, cols = window / side;
  size_t count = signal.size() / static_cast<size_t>(window);
  std::vector<Tensor> out;
  out.reserve(count);
  for (size_t w = 0; w < count; ++w) {
    Tensor m({rows, cols});
    const double* src = signal.data() + w * static_cast<size_t>(window);
    std::copy(src, src + window, m.data.begin());
    out.push_back(std::move(m));
  }
  return out;
}

// ----------------------------- normalization ----------------------------

void normalize_fit(DomainDataset& ds) {
  int d = ds.feature_count();
  std::vector<int> train;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].set != SetTag::Test) train.push_back(static_cast<int>(i));
  if (train.empty()) throw data_error("normalize: dataset has no training samples");

  NormStats stats;
  stats.mean.assign(static_cast<size_t>(d), 0.0);
  stats.stddev.assign(static_cast<size_t>(d), 0.0);
  double n = static_cast<double>(train.size());
  for (int idx : train) {
    const Tensor& m = ds.samples[static_cast<size_t>(idx)].matrix;
    for (int j = 0; j < d; ++j) stats.mean[static_cast<size_t>(j)] += m.data[static_cast<size_t>(j)];
  }
  for (int j = 0; j < d; ++j) stats.mean[static_cast<size_t>(j)] /= n;
  for (int idx : train) {
    const Tensor& m = ds.samples[static_cast<size_t>(idx)].matrix;
    for (int j = 0; j < d; ++j) {
      double diff = m.data[static_cast<size_t>(j)] - stats.mean[static_cast<size_t>(j)];
      stats.stddev[static_cast<size_t>(j)] += diff * diff;
    }
  }
  int clamped = 0;
  for (int j = 0; j < d; ++j) {
    double sd = std::sqrt(stats.stddev[static_cast<size_t>(j)] / n);
    if (sd < 1e-8) {
      sd = 1e-8;
      ++clamped;
    }
    stats.stddev[static_cast<size_t>(j)] = sd;
  }
  if (clamped > 0)
    warn("normalize: clamped " + std::to_string(clamped) +
         " zero-variance feature(s) to 1e-8");
  apply_normalization(ds, stats);
}

void apply_normalization(DomainDataset& ds, const NormStats& stats) {
  int d = ds.feature_count();
  if (static_cast<int>(stats.mean.size()) != d || static_cast<int>(stats.stddev.size()) != d)
    throw shape_error("normalization statistics dimension mismatch");
  for (LabeledSample& s : ds.samples)
    for (int j = 0; j < d; ++j)
      s.matrix.data[static_cast<size_t>(j)] =
          (s.matrix.data[static_cast<size_t>(j)] - stats.mean[static_cast<size_t>(j)]) /
          stats.stddev[static_cast<size_t>(j)];
  ds.norm = stats;
}

Tensor denormalize(const Tensor& m, const NormStats& stats) {
  Tensor out = m;
  for (size_t j = 0; j < out.data.size(); ++j)
    out.data[j] = out.data[j] * stats.stddev[j] + stats.mean[j];
  return out;
}

void split_reference(DomainDataset& ds, int n_ref, RandomStream& rng) {
  std::vector<int> train;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].set != SetTag::Test) train.push_back(static_cast<int>(i));
  if (n_ref < 0 || n_ref > static_cast<int>(train.size()))
    throw data_error("reference split: n_ref " + std::to_string(n_ref) +
                     " outside [0, " + std::to_string(train.size()) + "]");
  rng.shuffle(train);
  for (size_t i = 0; i < train.size(); ++i)
    ds.samples[static_cast<size_t>(train[i])].set =
        static_cast<int>(i) < n_ref ? SetTag::Reference : SetTag::Modeling;
}

// ------------------------------ synthetic -------------------------------

static constexpr double kClassPhaseStep = 40.0 * M_PI / 180.0;
static constexpr double kClassPhaseJitter = 5.0 * M_PI / 180.0;

std::vector<std::vector<double>> synth_prototypes(const SynthConfig& cfg) {
  int d = cfg.height * cfg.width;
  if (!cfg.prototypes.empty()) {
    if (static_cast<int>(cfg.prototypes.size()) != cfg.class_count)
      throw config_error("prototype count must equal class_count");
    for (const auto& p : cfg.prototypes)
      if (static_cast<int>(p.size()) != d)
        throw config_error("prototype length must equal height*width");
    return cfg.prototypes;
  }
  RandomStream rng = derive_stream(cfg.seed, "synth-prototypes");
  std::vector<double> base(static_cast<size_t>(d));
  for (double& v : base) v = rng.normal() * cfg.prototype_base_scale;
  std::vector<std::vector<double>> protos(static_cast<size_t>(cfg.class_count), base);
  // Phase code: feature pair (2k, 2k+1) carries radius prototype_class_scale
  // at angle ref_k + class * kClassPhaseStep (+ jitter).  Adjacent classes sit
  // 40 degrees apart per plane, close enough that a rotation shift of similar
  // size moves a class most of the way to its neighbour's position.
  for (int j = 0; j + 1 < d; j += 2) {
    double ref = rng.uniform() * 2.0 * M_PI;
    for (int c = 0; c < cfg.class_count; ++c) {
      double ang = ref + c * kClassPhaseStep + rng.normal() * kClassPhaseJitter;
      protos[static_cast<size_t>(c)][static_cast<size_t>(j)] +=
          cfg.prototype_class_scale * std::cos(ang);
      protos[static_cast<size_t>(c)][static_cast<size_t>(j + 1)] +=
          cfg.prototype_class_scale * std::sin(ang);
    }
  }
  return protos;
}

void apply_shift(std::vector<double>& x, const ShiftDescriptor& shift) {
  double th = shift.rotation_deg * M_PI / 180.0;
  if (th != 0.0) {
    double c = std::cos(th), s = std::sin(th);
    for (size_t k = 0; k + 1 < x.size(); k += 2) {
      double a = x[k], b = x[k + 1];
      x[k] = c * a - s * b;
      x[k + 1] = s * a + c * b;
    }
  }
  for (double& v : x) v = v * shift.scale + shift.offset;
}

std::pair<DomainDataset, DomainDataset> synth_generate(const SynthConfig& cfg) {
  if (cfg.class_count < 2) throw config_error("synth requires at least 2 classes");
  if (cfg.emerging_class && cfg.class_count < 2)
    throw config_error("emerging-class mode requires at least 2 classes");
  auto protos = synth_prototypes(cfg);

  auto make = [&](Domain dom) {
    DomainDataset ds;
    ds.height = cfg.height;
    ds.width = cfg.width;
    ds.label_space = cfg.class_count;
    ds.domain = dom;
    bool target = dom == Domain::Target;
    int first_class = (!target && cfg.emerging_class) ? 1 : 0;
    int per_class = target ? cfg.samples_per_class_target : cfg.samples_per_class_source;
    double noise = target ? cfg.shift.noise_std.value_or(cfg.noise_std) : cfg.noise_std;
    RandomStream rng = derive_stream(cfg.seed, target ? "synth-target" : "synth-source");
    int id = 0;
    for (int c = first_class; c < cfg.class_count; ++c)
      for (int s = 0; s < per_class; ++s) {
        std::vector<double> x = protos[static_cast<size_t>(c)];
        for (double& v : x) v += noise * rng.normal();
        if (target) apply_shift(x, cfg.shift);
        LabeledSample sample;
        sample.matrix = Tensor({cfg.height, cfg.width});
        std::copy(x.begin(), x.end(), sample.matrix.data.begin());
        sample.label = c;
        sample.domain = dom;
        sample.id = id++;
        ds.samples.push_back(std::move(sample));
      }
    ds.class_count = cfg.class_count - first_class;
    return ds;
  };
  return {make(Domain::Source), make(Domain::Target)};
}

// ----------------------------- persistence ------------------------------

static void write_doubles(std::ofstream& out, const double* v, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * 8));
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint64_t bits;
      std::memcpy(&bits, &v[i], 8);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      out.write(buf, 8);
    }
  }
}

static void read_doubles(std::ifstream& in, double* v, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * 8));
  } else {
    for (size_t i = 0; i < n; ++i) {
      char buf[8];
      in.read(buf, 8);
      uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<uint64_t>(static_cast<unsigned char>(buf[b])) << (8 * b);
      std::memcpy(&v[i], &bits, 8);
    }
  }
  if (!in) throw data_error("unexpected end of samples.bin");
}

void save_dataset(const DomainDataset& ds, const std::string& dir,
                  const std::string& extra_meta_json) {
  fs::create_directories(dir);
  std::ofstream bin(fs::path(dir) / "samples.bin", std::ios::binary);
  if (!bin) throw data_error("cannot write " + dir + "/samples.bin");
  for (const LabeledSample& s : ds.samples)
    write_doubles(bin, s.matrix.data.data(), s.matrix.data.size());
  bin.close();

  json meta;
  meta["shape"] = {ds.height, ds.width};
  json labels = json::array();
  for (const LabeledSample& s : ds.samples) labels.push_back(s.label);
  meta["labels"] = std::move(labels);
  meta["domain"] = domain_to_string(ds.domain);
  meta["class_count"] = ds.class_count;
  meta["label_space"] = ds.label_space;
  if (ds.norm) {
    meta["normalization"] = {{"mean", ds.norm->mean}, {"std", ds.norm->stddev}};
  }
  if (!extra_meta_json.empty()) {
    json extra = json::parse(extra_meta_json);
    for (auto& [k, v] : extra.items()) meta[k] = v;
  }
  std::ofstream mf(fs::path(dir) / "meta.json");
  mf << meta.dump(2) << "\n";
}

DomainDataset load_dataset(const std::string& dir) {
  fs::path meta_path = fs::path(dir) / "meta.json";
  std::ifstream mf(meta_path);
  if (!mf) throw data_error("cannot read " + meta_path.string());
  json meta;
  try {
    mf >> meta;
  } catch (const json::exception& e) {
    throw data_error("invalid meta.json in " + dir + ": " + e.what());
  }
  DomainDataset ds;
  try {
    ds.height = meta.at("shape").at(0).get<int>();
    ds.width = meta.at("shape").at(1).get<int>();
    ds.class_count = meta.at("class_count").get<int>();
    ds.domain = domain_from_string(meta.at("domain").get<std::string>());
    ds.label_space = meta.value("label_space", ds.class_count);
    if (meta.contains("normalization")) {
      NormStats stats;
      stats.mean = meta["normalization"].at("mean").get<std::vector<double>>();
      stats.stddev = meta["normalization"].at("std").get<std::vector<double>>();
      ds.norm = std::move(stats);
    }
    std::vector<int> labels = meta.at("labels").get<std::vector<int>>();
    std::ifstream bin(fs::path(dir) / "samples.bin", std::ios::binary);
    if (!bin) throw data_error("cannot read " + dir + "/samples.bin");
    int id = 0;
    for (int y : labels) {
      LabeledSample s;
      s.matrix = Tensor({ds.height, ds.width});
      read_doubles(bin, s.matrix.data.data(), s.matrix.data.size());
      s.label = y;
      s.domain = ds.domain;
      s.id = id++;
      ds.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw data_error("invalid meta.json in " + dir + ": " + e.what());
  }
  ds.validate();
  return ds;
}

// ------------------------------ manifests -------------------------------

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot read manifest " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw data_error("invalid manifest JSON: " + std::string(e.what()));
  }
  Manifest m;
  try {
    m.window = j.value("window", 1024);
    m.side = j.value("side", 32);
    for (const json& s : j.at("signals")) {
      ManifestEntry e;
      e.path = s.at("path").get<std::string>();
      e.condition = s.at("condition").get<std::string>();
      e.class_label = s.at("class").get<int>();
      if (e.class_label < 0) throw data_error("manifest class labels must be non-negative");
      m.signals.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw data_error("invalid manifest: " + std::string(e.what()));
  }
  if (m.signals.empty()) throw data_error("manifest lists no signals");
  return m;
}

std::vector<double> load_signal(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot read signal " + path);
  std::vector<double> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    std::string tok = line.substr(a, b - a + 1);
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw data_error("signal " + path + ": cannot parse line " + std::to_string(lineno));
    out.push_back(v);
  }
  return out;
}

std::map<std::string, DomainDataset> prepare_from_manifest(const Manifest& m,
                                                           const std::string& base_dir) {
  std::map<std::string, DomainDataset> out;
  for (const ManifestEntry& e : m.signals) {
    fs::path p(e.path);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    std::vector<double> signal = load_signal(p.string());
    std::vector<Tensor> windows = window_signal(signal, m.window, m.side);
    DomainDataset& ds = out[e.condition];
    if (ds.samples.empty() && ds.height == 0) {
      ds.height = m.side;
      ds.width = m.window / m.side;
    }
    for (Tensor& w : windows) {
      LabeledSample s;
      s.matrix = std::move(w);
      s.label = e.class_label;
      s.id = static_cast<int>(ds.samples.size());
      ds.samples.push_back(std::move(s));
    }
  }
  for (auto& [cond, ds] : out) {
    if (ds.samples.empty())
      throw data_error("condition '" + cond + "' produced no samples (signals too short)");
    std::set<int> distinct;
    int max_label = 0;
    for (const LabeledSample& s : ds.samples) {
      distinct.insert(s.label);
      max_label = std::max(max_label, s.label);
    }
    ds.class_count = static_cast<int>(distinct.size());
    ds.label_space = max_label + 1;
    ds.validate();
  }
  return out;
}

}  // namespace gtnp
