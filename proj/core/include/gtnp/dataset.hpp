#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gtnp/random.hpp"
#include "gtnp/tensor.hpp"

namespace gtnp {

enum class Domain { Source, Target };
// Training data is split into a labeled reference set (graph anchors) and a
// modeling set; test samples never feed training.
enum class SetTag { Reference, Modeling, Test };

std::string domain_to_string(Domain d);
Domain domain_from_string(const std::string& s);

struct LabeledSample {
  Tensor matrix;  // (H, W)
  int label = -1;
  Domain domain = Domain::Source;
  SetTag set = SetTag::Modeling;
  int id = 0;
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct DomainDataset {
  std::vector<LabeledSample> samples;
  int height = 0;
  int width = 0;
  int class_count = 0;  // distinct classes present in this dataset
  int label_space = 0;  // size of the union label set across domains
  Domain domain = Domain::Source;
  std::optional<NormStats> norm;

  int feature_count() const { return height * width; }
  std::vector<int> indices_with(SetTag tag) const;
  void validate() const;
};

// Slices a signal into floor(len/window) non-overlapping windows, each
// reshaped row-major into a (side, window/side) matrix. The remainder of the
// signal is discarded.
std::vector<Tensor> window_signal(const std::vector<double>& signal, int window = 1024,
                                  int side = 32);

// Per-feature z-score. Statistics are computed over the dataset's non-test
// samples, stored on the dataset, and applied to every sample. Features with
// near-zero spread are clamped to 1e-8 with a warning.
void normalize_fit(DomainDataset& ds);
void apply_normalization(DomainDataset& ds, const NormStats& stats);
Tensor denormalize(const Tensor& m, const NormStats& stats);

// Uniformly tags n_ref of the non-test samples as the reference set; the
// remaining non-test samples become the modeling set.
void split_reference(DomainDataset& ds, int n_ref, RandomStream& rng);

// ------------------------------ synthetic -------------------------------

struct ShiftDescriptor {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double offset = 0.0;
  std::optional<double> noise_std;  // target noise; defaults to the source's
};

struct SynthConfig {
  int class_count = 4;
  int height = 16;
  int width = 16;
  int samples_per_class_source = 200;
  int samples_per_class_target = 200;
  double noise_std = 0.1;
  // Prototypes default to a shared random base plus a class phase code: every
  // feature pair holds a point on a circle of radius prototype_class_scale
  // whose angle advances a fixed step per class.  Class identity therefore
  // lives in the planes a rotation shift acts on, so rotating the target
  // domain drags each class toward its neighbour instead of applying a
  // transform the per-domain normalization or a margin-trained classifier
  // would shrug off.
  double prototype_base_scale = 1.0;
  double prototype_class_scale = 0.3;
  std::vector<std::vector<double>> prototypes;  // optional explicit override
  ShiftDescriptor shift;
  // When set, class 0 exists only in the target domain.
  bool emerging_class = false;
  uint64_t seed = 0;
};

// Class prototypes used by the generator (explicit or derived from the seed).
std::vector<std::vector<double>> synth_prototypes(const SynthConfig& cfg);
// Applies the shift transform (rotate pairs of coordinates, scale, offset) to
// a flattened sample.
void apply_shift(std::vector<double>& x, const ShiftDescriptor& shift);
std::pair<DomainDataset, DomainDataset> synth_generate(const SynthConfig& cfg);

// ----------------------------- persistence ------------------------------

// Directory layout: samples.bin (little-endian float64, sample-major,
// row-major within a sample) plus meta.json.
void save_dataset(const DomainDataset& ds, const std::string& dir,
                  const std::string& extra_meta_json = "");
DomainDataset load_dataset(const std::string& dir);

// ------------------------------ manifests -------------------------------

struct ManifestEntry {
  std::string path;
  std::string condition;
  int class_label = -1;
};

struct Manifest {
  std::vector<ManifestEntry> signals;
  int window = 1024;
  int side = 32;
};

Manifest load_manifest(const std::string& path);
std::vector<double> load_signal(const std::string& path);
// Windows every signal and groups the resulting samples by condition.
std::map<std::string, DomainDataset> prepare_from_manifest(const Manifest& m,
                                                           const std::string& base_dir);

}  // namespace gtnp
