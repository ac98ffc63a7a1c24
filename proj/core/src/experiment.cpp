#include "gtnp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gtnp/errors.hpp"
#include "gtnp/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gtnp {

// ------------------------------ json utils --------------------------------

static void check_keys(const json& obj, const std::string& ctx,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw config_error(ctx + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) { known = true; break; }
    if (!known) throw config_error(ctx + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
static T field(const json& obj, const std::string& ctx, const char* key, T def) {
  if (!obj.contains(key)) return def;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(ctx + "." + key + ": " + e.what());
  }
}

static std::string hash_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)hash64(text));
  return buf;
}

// ------------------------------ config parse ------------------------------

static ShiftDescriptor parse_shift(const json& j) {
  check_keys(j, "data.synth.shift", {"rotation_deg", "scale", "offset", "noise_std"});
  ShiftDescriptor s;
  s.rotation_deg = field(j, "data.synth.shift", "rotation_deg", s.rotation_deg);
  s.scale = field(j, "data.synth.shift", "scale", s.scale);
  s.offset = field(j, "data.synth.shift", "offset", s.offset);
  if (j.contains("noise_std"))
    s.noise_std = field(j, "data.synth.shift", "noise_std", 0.0);
  return s;
}

static SynthConfig parse_synth(const json& j) {
  check_keys(j, "data.synth",
             {"class_count", "height", "width", "samples_per_class_source",
              "samples_per_class_target", "noise_std", "prototype_base_scale",
              "prototype_class_scale", "prototypes", "shift", "emerging_class"});
  SynthConfig s;
  s.class_count = field(j, "data.synth", "class_count", s.class_count);
  s.height = field(j, "data.synth", "height", s.height);
  s.width = field(j, "data.synth", "width", s.width);
  s.samples_per_class_source =
      field(j, "data.synth", "samples_per_class_source", s.samples_per_class_source);
  s.samples_per_class_target =
      field(j, "data.synth", "samples_per_class_target", s.samples_per_class_target);
  s.noise_std = field(j, "data.synth", "noise_std", s.noise_std);
  s.prototype_base_scale =
      field(j, "data.synth", "prototype_base_scale", s.prototype_base_scale);
  s.prototype_class_scale =
      field(j, "data.synth", "prototype_class_scale", s.prototype_class_scale);
  s.prototypes = field(j, "data.synth", "prototypes", s.prototypes);
  if (j.contains("shift")) s.shift = parse_shift(j.at("shift"));
  s.emerging_class = field(j, "data.synth", "emerging_class", s.emerging_class);
  return s;
}

static DataBlock parse_data(const json& j) {
  check_keys(j, "data",
             {"kind", "synth", "source_dir", "target_dir", "source_test_fraction",
              "target_train_count"});
  DataBlock d;
  d.kind = field(j, "data", "kind", d.kind);
  if (d.kind != "synth" && d.kind != "dirs")
    throw config_error("data.kind: expected 'synth' or 'dirs', got '" + d.kind + "'");
  if (j.contains("synth")) d.synth = parse_synth(j.at("synth"));
  d.source_dir = field(j, "data", "source_dir", d.source_dir);
  d.target_dir = field(j, "data", "target_dir", d.target_dir);
  d.source_test_fraction =
      field(j, "data", "source_test_fraction", d.source_test_fraction);
  d.target_train_count = field(j, "data", "target_train_count", d.target_train_count);
  if (d.kind == "dirs" && (d.source_dir.empty() || d.target_dir.empty()))
    throw config_error("data: kind 'dirs' requires source_dir and target_dir");
  if (!(d.source_test_fraction > 0.0 && d.source_test_fraction < 1.0))
    throw config_error("data.source_test_fraction: expected a value in (0, 1)");
  if (d.target_train_count < 1)
    throw config_error("data.target_train_count: expected a positive count");
  return d;
}

static ModelDims parse_model(const json& j) {
  check_keys(j, "model", {"d_f", "d_g", "d_u", "d_z", "msg_hidden", "gcn_hidden"});
  ModelDims m;
  m.d_f = field(j, "model", "d_f", m.d_f);
  m.d_g = field(j, "model", "d_g", m.d_g);
  m.d_u = field(j, "model", "d_u", m.d_u);
  m.d_z = field(j, "model", "d_z", m.d_z);
  m.msg_hidden = field(j, "model", "msg_hidden", m.msg_hidden);
  m.gcn_hidden = field(j, "model", "gcn_hidden", m.gcn_hidden);
  return m;
}

static void parse_train(const json& j, TrainConfig& t) {
  check_keys(j, "train",
             {"batch_size", "learning_rate", "optimizer", "epochs", "n_ref",
              "n_ref_source", "gcn_nodes", "gcn_epochs", "gcn_lr", "gcn_optimizer",
              "use_target_labels", "untrained_graph"});
  t.batch_size = field(j, "train", "batch_size", t.batch_size);
  t.learning_rate = field(j, "train", "learning_rate", t.learning_rate);
  t.optimizer = opt_method_from_string(
      field<std::string>(j, "train", "optimizer", opt_method_to_string(t.optimizer)));
  t.epochs = field(j, "train", "epochs", t.epochs);
  t.n_ref = field(j, "train", "n_ref", t.n_ref);
  t.n_ref_source = field(j, "train", "n_ref_source", t.n_ref_source);
  t.gcn_nodes = field(j, "train", "gcn_nodes", t.gcn_nodes);
  t.gcn_epochs = field(j, "train", "gcn_epochs", t.gcn_epochs);
  t.gcn_lr = field(j, "train", "gcn_lr", t.gcn_lr);
  t.gcn_optimizer = opt_method_from_string(field<std::string>(
      j, "train", "gcn_optimizer", opt_method_to_string(t.gcn_optimizer)));
  t.use_target_labels = field(j, "train", "use_target_labels", t.use_target_labels);
  t.untrained_graph = field(j, "train", "untrained_graph", t.untrained_graph);
}

static void parse_losses(const json& j, TrainConfig& t) {
  check_keys(j, "losses", {"lambda_mmd", "amplitude", "mmd_sigma"});
  t.weights.lambda_mmd = field(j, "losses", "lambda_mmd", t.weights.lambda_mmd);
  t.weights.amplitude = field(j, "losses", "amplitude", t.weights.amplitude);
  if (j.contains("mmd_sigma")) {
    const json& s = j.at("mmd_sigma");
    if (s.is_string()) {
      if (s.get<std::string>() != "median")
        throw config_error("losses.mmd_sigma: expected 'median' or a positive number");
      t.mmd.median_heuristic = true;
    } else if (s.is_number()) {
      double v = s.get<double>();
      if (!(v > 0.0))
        throw config_error("losses.mmd_sigma: expected 'median' or a positive number");
      t.mmd.median_heuristic = false;
      t.mmd.fixed_sigma = v;
    } else {
      throw config_error("losses.mmd_sigma: expected 'median' or a positive number");
    }
  }
}

static UncertaintyBlock parse_uncertainty(const json& j) {
  check_keys(j, "uncertainty", {"n_draws", "selected_ids"});
  UncertaintyBlock u;
  u.n_draws = field(j, "uncertainty", "n_draws", u.n_draws);
  u.selected_ids = field(j, "uncertainty", "selected_ids", u.selected_ids);
  if (u.n_draws < 1) throw config_error("uncertainty.n_draws: expected a positive count");
  return u;
}

static BaselinesBlock parse_baselines(const json& j) {
  check_keys(j, "baselines", {"enabled", "epochs"});
  BaselinesBlock b;
  b.enabled = field(j, "baselines", "enabled", b.enabled);
  b.epochs = field(j, "baselines", "epochs", b.epochs);
  if (b.epochs < -1) throw config_error("baselines.epochs: expected -1 or a count");
  return b;
}

// The canonical document: every field that influences results, defaults
// materialized, output location excluded.
static json canonical_of(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;

  json d;
  d["kind"] = c.data.kind;
  if (c.data.kind == "synth") {
    const SynthConfig& s = c.data.synth;
    json sj;
    sj["class_count"] = s.class_count;
    sj["height"] = s.height;
    sj["width"] = s.width;
    sj["samples_per_class_source"] = s.samples_per_class_source;
    sj["samples_per_class_target"] = s.samples_per_class_target;
    sj["noise_std"] = s.noise_std;
    sj["prototype_base_scale"] = s.prototype_base_scale;
    sj["prototype_class_scale"] = s.prototype_class_scale;
    if (!s.prototypes.empty()) sj["prototypes"] = s.prototypes;
    json shj;
    shj["rotation_deg"] = s.shift.rotation_deg;
    shj["scale"] = s.shift.scale;
    shj["offset"] = s.shift.offset;
    if (s.shift.noise_std) shj["noise_std"] = *s.shift.noise_std;
    sj["shift"] = shj;
    sj["emerging_class"] = s.emerging_class;
    d["synth"] = sj;
  } else {
    d["source_dir"] = c.data.source_dir;
    d["target_dir"] = c.data.target_dir;
  }
  d["source_test_fraction"] = c.data.source_test_fraction;
  d["target_train_count"] = c.data.target_train_count;
  j["data"] = d;

  j["model"] = {{"d_f", c.model.d_f},           {"d_g", c.model.d_g},
                {"d_u", c.model.d_u},           {"d_z", c.model.d_z},
                {"msg_hidden", c.model.msg_hidden}, {"gcn_hidden", c.model.gcn_hidden}};

  const TrainConfig& t = c.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"optimizer", opt_method_to_string(t.optimizer)},
                {"epochs", t.epochs},
                {"n_ref", t.n_ref},
                {"n_ref_source", t.n_ref_source},
                {"gcn_nodes", t.gcn_nodes},
                {"gcn_epochs", t.gcn_epochs},
                {"gcn_lr", t.gcn_lr},
                {"gcn_optimizer", opt_method_to_string(t.gcn_optimizer)},
                {"use_target_labels", t.use_target_labels},
                {"untrained_graph", t.untrained_graph}};

  json losses;
  losses["lambda_mmd"] = t.weights.lambda_mmd;
  losses["amplitude"] = t.weights.amplitude;
  if (t.mmd.median_heuristic)
    losses["mmd_sigma"] = "median";
  else
    losses["mmd_sigma"] = t.mmd.fixed_sigma;
  j["losses"] = losses;

  j["uncertainty"] = {{"n_draws", c.uncertainty.n_draws},
                      {"selected_ids", c.uncertainty.selected_ids}};
  j["baselines"] = {{"enabled", c.baselines.enabled}, {"epochs", c.baselines.epochs}};
  return j;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        std::optional<uint64_t> seed_override,
                                        std::optional<std::string> out_override) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("config " + path + ": " + e.what());
  }
  check_keys(j, "config",
             {"seed", "output_dir", "data", "model", "train", "losses", "uncertainty",
              "baselines"});

  ExperimentConfig c;
  c.seed = field<uint64_t>(j, "config", "seed", 0);
  c.output_dir = field<std::string>(j, "config", "output_dir", c.output_dir);
  if (j.contains("data")) c.data = parse_data(j.at("data"));
  if (j.contains("model")) c.model = parse_model(j.at("model"));
  if (j.contains("train")) parse_train(j.at("train"), c.train);
  if (j.contains("losses")) parse_losses(j.at("losses"), c.train);
  if (j.contains("uncertainty")) c.uncertainty = parse_uncertainty(j.at("uncertainty"));
  if (j.contains("baselines")) c.baselines = parse_baselines(j.at("baselines"));

  if (seed_override) c.seed = *seed_override;
  if (out_override) c.output_dir = *out_override;

  c.train.dims = c.model;
  c.train.seed = c.seed;
  c.train.validate();

  json canon = canonical_of(c);
  c.canonical = canon.dump();
  c.config_hash = hash_hex(c.canonical);
  return c;
}

// ------------------------------ splits ------------------------------------

void tag_source_test_split(DomainDataset& ds, double test_fraction, RandomStream& rng) {
  int n = (int)ds.samples.size();
  int n_test = (int)std::lround(test_fraction * n);
  if (n_test < 1 || n_test >= n)
    throw data_error("source test split: fraction " + std::to_string(test_fraction) +
                     " of " + std::to_string(n) + " samples leaves an empty side");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  for (auto& s : ds.samples) s.set = SetTag::Modeling;
  for (int i = 0; i < n_test; ++i) ds.samples[idx[i]].set = SetTag::Test;
}

void tag_target_test_split(DomainDataset& ds, int train_count, RandomStream& rng) {
  int n = (int)ds.samples.size();
  if (train_count >= n)
    throw data_error("target test split: train count " + std::to_string(train_count) +
                     " leaves no test samples out of " + std::to_string(n));
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  for (auto& s : ds.samples) s.set = SetTag::Test;
  for (int i = 0; i < train_count; ++i) ds.samples[idx[i]].set = SetTag::Modeling;
}

std::pair<DomainDataset, DomainDataset> prepare_domains(const ExperimentConfig& cfg) {
  DomainDataset source, target;
  if (cfg.data.kind == "synth") {
    SynthConfig sc = cfg.data.synth;
    sc.seed = cfg.seed;
    std::tie(source, target) = synth_generate(sc);
  } else {
    source = load_dataset(cfg.data.source_dir);
    target = load_dataset(cfg.data.target_dir);
    if (source.domain != Domain::Source || target.domain != Domain::Target)
      warn("dataset domains in meta.json disagree with their roles; overriding");
    source.domain = Domain::Source;
    target.domain = Domain::Target;
    int space = std::max(source.label_space, target.label_space);
    source.label_space = target.label_space = space;
    if (source.height != target.height || source.width != target.width)
      throw data_error("source and target sample shapes differ");
  }

  RandomStream rs = derive_stream(cfg.seed, "test-split-source");
  RandomStream rt = derive_stream(cfg.seed, "test-split-target");
  tag_source_test_split(source, cfg.data.source_test_fraction, rs);
  tag_target_test_split(target, cfg.data.target_train_count, rt);
  normalize_fit(source);
  normalize_fit(target);
  source.validate();
  target.validate();
  return {std::move(source), std::move(target)};
}

// ------------------------------ evaluation --------------------------------

namespace {

struct EvalOutput {
  MetricsReport report;
  std::vector<RocCurve> roc;
  Tensor probs;
  std::vector<int> labels, preds, ids;
};

template <typename ProbFn>
EvalOutput evaluate_on(ProbFn&& prob_fn, const DomainDataset& ds,
                       const std::vector<int>& indices) {
  if (indices.empty()) throw data_error("evaluation set is empty");
  std::vector<const Tensor*> mats;
  EvalOutput out;
  mats.reserve(indices.size());
  for (int i : indices) {
    mats.push_back(&ds.samples[i].matrix);
    out.labels.push_back(ds.samples[i].label);
    out.ids.push_back(ds.samples[i].id);
  }
  Tensor x4 = stack_batch(mats);
  out.probs = prob_fn(x4);
  int classes = out.probs.dim(1);
  for (int r = 0; r < out.probs.dim(0); ++r) {
    int best = 0;
    for (int c = 1; c < classes; ++c)
      if (out.probs.at(r, c) > out.probs.at(r, best)) best = c;
    out.preds.push_back(best);
  }
  out.report = compute_metrics(out.preds, out.labels, ds.label_space);
  out.roc = roc_auc(out.probs, out.labels);
  return out;
}

json eval_json(const EvalOutput& e) {
  json m;
  m["accuracy"] = e.report.accuracy;
  m["macro_precision"] = e.report.macro_precision;
  m["macro_recall"] = e.report.macro_recall;
  m["macro_f1"] = e.report.macro_f1;
  m["total"] = e.report.total;
  json per = json::array();
  for (int k = 0; k < (int)e.report.per_class.size(); ++k) {
    const auto& c = e.report.per_class[k];
    per.push_back({{"class", k},
                   {"precision", c.precision},
                   {"recall", c.recall},
                   {"f1", c.f1},
                   {"support", c.support}});
  }
  m["per_class"] = per;
  m["confusion"] = e.report.confusion;
  json auc = json::array();
  for (const auto& r : e.roc)
    auc.push_back({{"class", r.cls}, {"auc", r.auc}, {"valid", r.valid}});
  m["auc"] = auc;
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path);
  out << text;
  if (!out.good()) throw data_error("short write to " + path);
}

void write_roc_csvs(const EvalOutput& e, const std::string& out_dir,
                    const std::string& prefix, const std::string& hash, uint64_t seed) {
  for (const auto& r : e.roc) {
    if (!r.valid) continue;
    std::ostringstream os;
    os.precision(17);
    os << "# config_hash=" << hash << " seed=" << seed << "\n";
    os << "fpr,tpr\n";
    for (size_t i = 0; i < r.fpr.size(); ++i) os << r.fpr[i] << "," << r.tpr[i] << "\n";
    write_text(out_dir + "/" + prefix + "_roc_class" + std::to_string(r.cls) + ".csv",
               os.str());
  }
}

// A tag-filtered copy that survives a save/load round trip for later
// standalone evaluation.
DomainDataset subset_by_tag(const DomainDataset& ds, SetTag tag) {
  DomainDataset out = ds;
  out.samples.clear();
  std::set<int> classes;
  for (const auto& s : ds.samples)
    if (s.set == tag) {
      out.samples.push_back(s);
      classes.insert(s.label);
    }
  out.class_count = (int)classes.size();
  return out;
}

json breakdown_json(const LossBreakdown& b) {
  return {{"dist_source", b.dist_source}, {"dist_target", b.dist_target},
          {"cls_source", b.cls_source},   {"cls_target", b.cls_target},
          {"mmd", b.mmd},                 {"global_kl", b.global_kl},
          {"total", b.total}};
}

}  // namespace

// ------------------------------ subcommands -------------------------------

void cmd_synth(const ExperimentConfig& cfg) {
  if (cfg.data.kind != "synth")
    throw config_error("synth: config data.kind must be 'synth'");
  SynthConfig sc = cfg.data.synth;
  sc.seed = cfg.seed;
  auto [source, target] = synth_generate(sc);
  fs::create_directories(cfg.output_dir);
  json extra = {{"config_hash", cfg.config_hash}, {"seed", cfg.seed}};
  save_dataset(source, cfg.output_dir + "/source", extra.dump());
  save_dataset(target, cfg.output_dir + "/target", extra.dump());
  info("synth: wrote " + std::to_string(source.samples.size()) + " source and " +
       std::to_string(target.samples.size()) + " target samples under " + cfg.output_dir);
}

void cmd_prepare(const std::string& manifest_path, const std::string& out_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw data_error("cannot open manifest: " + manifest_path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string manifest_text = ss.str();
  std::string hash = hash_hex(manifest_text);

  Manifest m = load_manifest(manifest_path);
  std::string base = fs::path(manifest_path).parent_path().string();
  auto by_condition = prepare_from_manifest(m, base);
  fs::create_directories(out_dir);
  json extra = {{"config_hash", hash}, {"seed", 0}};
  json index;
  index["config_hash"] = hash;
  index["seed"] = 0;
  json conds = json::array();
  for (auto& [name, ds] : by_condition) {
    save_dataset(ds, out_dir + "/" + name, extra.dump());
    conds.push_back({{"condition", name},
                     {"samples", ds.samples.size()},
                     {"classes", ds.class_count}});
  }
  index["conditions"] = conds;
  write_text(out_dir + "/prepare.json", index.dump(2) + "\n");
  info("prepare: wrote " + std::to_string(by_condition.size()) + " condition datasets");
}

void cmd_pretrain_gcn(const ExperimentConfig& cfg) {
  auto [source, target] = prepare_domains(cfg);
  (void)target;
  fs::create_directories(cfg.output_dir);

  auto state = init_state(cfg.train, source.height, source.width, source.label_space);
  std::vector<int> train_idx;
  for (int i = 0; i < (int)source.samples.size(); ++i)
    if (source.samples[i].set != SetTag::Test) train_idx.push_back(i);
  int count = std::min(cfg.train.gcn_nodes, (int)train_idx.size());
  if (count < 2) throw data_error("graph pretraining needs at least two nodes");
  RandomStream rs = derive_stream(cfg.seed, "gcn-subset");
  rs.shuffle(train_idx);
  train_idx.resize(count);
  std::sort(train_idx.begin(), train_idx.end());

  std::vector<const Tensor*> mats;
  std::vector<int> labels;
  for (int i : train_idx) {
    mats.push_back(&source.samples[i].matrix);
    labels.push_back(source.samples[i].label);
  }
  Tensor feats = state->extractor.infer(stack_batch(mats));
  PretrainResult pr =
      pretrain_gcn(feats, labels, source.label_space, cfg.train.dims.gcn_hidden,
                   cfg.train.gcn_epochs, cfg.train.gcn_lr, cfg.train.gcn_optimizer,
                   cfg.seed);

  std::ostringstream os;
  os.precision(17);
  os << "# config_hash=" << cfg.config_hash << " seed=" << cfg.seed << "\n";
  os << "epoch,node_ce,edge_bce,node_acc\n";
  for (const auto& row : pr.trace)
    os << row.epoch << "," << row.node_ce << "," << row.edge_bce << "," << row.node_acc
       << "\n";
  write_text(cfg.output_dir + "/gcn_trace.csv", os.str());

  TensorArchive ar;
  for (Parameter* p : pr.params.params()) ar.add(p->name, p->value);
  ar.add("graphs.g_pretrain", pr.g);
  ar.meta_str["config_hash"] = cfg.config_hash;
  ar.meta_int["seed"] = (long long)cfg.seed;
  ar.meta_int["label_space"] = source.label_space;
  save_archive(ar, cfg.output_dir + "/gcn_pretrain.bin");
  info("pretrain-gcn: " + std::to_string(count) + " nodes, final node accuracy " +
       std::to_string(pr.trace.empty() ? 0.0 : pr.trace.back().node_acc));
}

void cmd_train(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  auto [source, target] = prepare_domains(cfg);
  // Baselines consume the identical splits; copies taken before fit() writes
  // reference/modeling tags into the training sets.
  DomainDataset source_b = source, target_b = target;

  FitResult fr = fit(cfg.train, source, target);

  auto gtnp_prob = [&](const Tensor& x4) { return predict_probabilities(*fr.state, x4); };
  EvalOutput ev_src = evaluate_on(gtnp_prob, source, source.indices_with(SetTag::Test));
  EvalOutput ev_tgt = evaluate_on(gtnp_prob, target, target.indices_with(SetTag::Test));

  json metrics;
  metrics["config_hash"] = cfg.config_hash;
  metrics["seed"] = cfg.seed;
  metrics["config"] = json::parse(cfg.canonical);
  metrics["gtnp"] = {{"source_test", eval_json(ev_src)}, {"target_test", eval_json(ev_tgt)}};

  if (cfg.baselines.enabled) {
    json blocks;
    for (auto variant :
         {BaselineConfig::Variant::SourceOnly, BaselineConfig::Variant::MmdOnly}) {
      BaselineConfig bc;
      bc.variant = variant;
      bc.batch_size = cfg.train.batch_size;
      bc.learning_rate = cfg.train.learning_rate;
      bc.optimizer = cfg.train.optimizer;
      bc.epochs = cfg.baselines.epochs < 0 ? cfg.train.epochs : cfg.baselines.epochs;
      bc.seed = cfg.seed;
      bc.lambda_mmd = cfg.train.weights.lambda_mmd;
      bc.mmd = cfg.train.mmd;
      bc.dims = cfg.train.dims;
      BaselineResult br = train_baseline(bc, source_b, target_b);
      auto prob = [&](const Tensor& x4) { return br.model->predict_probabilities(x4); };
      EvalOutput eb = evaluate_on(prob, target_b, target_b.indices_with(SetTag::Test));
      json blk;
      blk["target_test"] = eval_json(eb);
      blk["epoch_loss"] = br.epoch_loss;
      blocks[baseline_variant_name(variant)] = blk;
    }
    metrics["baselines"] = blocks;
  }

  json epochs = json::array();
  for (const auto& e : fr.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"mean_loss", breakdown_json(e.mean_loss)},
                      {"kl_qp_mean", e.kl_qp_mean},
                      {"global_latent",
                       {{"mean_avg", e.global_mean_avg}, {"var_avg", e.global_var_avg}}}});
  json gcn;
  gcn["reused_reference"] = fr.gcn_reused_reference;
  if (!fr.gcn_trace.empty()) {
    gcn["final_node_ce"] = fr.gcn_trace.back().node_ce;
    gcn["final_edge_bce"] = fr.gcn_trace.back().edge_bce;
    gcn["final_node_acc"] = fr.gcn_trace.back().node_acc;
  }
  metrics["training"] = {{"epochs", epochs},
                         {"initial_global_var", fr.initial_global_var},
                         {"gcn", gcn}};
  write_text(cfg.output_dir + "/metrics.json", metrics.dump(2) + "\n");

  std::ostringstream trace;
  for (const auto& s : fr.steps) {
    json line = {{"config_hash", cfg.config_hash},
                 {"seed", cfg.seed},
                 {"epoch", s.epoch},
                 {"step", s.step},
                 {"loss", breakdown_json(s.loss)},
                 {"global_latent",
                  {{"mean_avg", s.global_mean_avg}, {"var_avg", s.global_var_avg}}},
                 {"kl_qp_mean", s.kl_qp_mean}};
    trace << line.dump() << "\n";
  }
  write_text(cfg.output_dir + "/trace.jsonl", trace.str());

  TensorArchive ar = fr.state->to_archive();
  ar.meta_str["config_hash"] = cfg.config_hash;
  ar.meta_int["seed"] = (long long)cfg.seed;
  save_archive(ar, cfg.output_dir + "/checkpoint.bin");

  json extra = {{"config_hash", cfg.config_hash}, {"seed", cfg.seed}};
  save_dataset(subset_by_tag(source, SetTag::Test), cfg.output_dir + "/eval_source",
               extra.dump());
  save_dataset(subset_by_tag(target, SetTag::Test), cfg.output_dir + "/eval_target",
               extra.dump());

  write_roc_csvs(ev_tgt, cfg.output_dir, "target", cfg.config_hash, cfg.seed);

  UncertaintyReportConfig uc;
  uc.n_draws = cfg.uncertainty.n_draws;
  uc.seed = cfg.seed;
  uc.config_hash = cfg.config_hash;
  uc.selected_ids = cfg.uncertainty.selected_ids;
  if (uc.selected_ids.empty()) {
    // default: first test sample of each class
    std::set<int> seen;
    for (int i : target.indices_with(SetTag::Test)) {
      const auto& s = target.samples[i];
      if (seen.insert(s.label).second) uc.selected_ids.push_back(s.id);
    }
  }
  std::vector<GlobalTraceRecord> gtrace;
  for (const auto& e : fr.epochs)
    gtrace.push_back({e.epoch, e.global_mean_avg, e.global_var_avg});
  uncertainty_report(*fr.state, target, SetTag::Test, gtrace, uc, cfg.output_dir);

  info("train: target test accuracy " + std::to_string(ev_tgt.report.accuracy));
}

void cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
              const std::string& out_dir) {
  TensorArchive ar = load_archive(checkpoint_path);
  auto state = state_from_archive(ar);
  DomainDataset ds = load_dataset(data_dir);

  std::vector<int> all(ds.samples.size());
  for (int i = 0; i < (int)all.size(); ++i) all[i] = i;
  auto prob = [&](const Tensor& x4) { return predict_probabilities(*state, x4); };
  EvalOutput e = evaluate_on(prob, ds, all);

  json out;
  out["config_hash"] =
      ar.meta_str.count("config_hash") ? ar.meta_str.at("config_hash") : "";
  out["seed"] = ar.meta_int.count("seed") ? ar.meta_int.at("seed") : 0;
  out["checkpoint"] = checkpoint_path;
  out["data"] = data_dir;
  out["metrics"] = eval_json(e);
  fs::create_directories(out_dir);
  write_text(out_dir + "/eval_metrics.json", out.dump(2) + "\n");
  info("eval: accuracy " + std::to_string(e.report.accuracy) + " over " +
       std::to_string(e.report.total) + " samples");
}

void cmd_uncertainty(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                     const std::string& data_dir) {
  TensorArchive ar = load_archive(checkpoint_path);
  auto state = state_from_archive(ar);
  DomainDataset ds = load_dataset(data_dir);

  UncertaintyReportConfig uc;
  uc.n_draws = cfg.uncertainty.n_draws;
  uc.seed = cfg.seed;
  uc.config_hash = cfg.config_hash;
  uc.selected_ids = cfg.uncertainty.selected_ids;
  if (uc.selected_ids.empty()) {
    std::set<int> seen;
    for (const auto& s : ds.samples)
      if (seen.insert(s.label).second) uc.selected_ids.push_back(s.id);
  }
  fs::create_directories(cfg.output_dir);
  uncertainty_report(*state, ds, SetTag::Modeling, {}, uc, cfg.output_dir);
  info("uncertainty: report over " + std::to_string(ds.samples.size()) + " samples");
}

void cmd_report(const std::string& out_dir) {
  std::ifstream in(out_dir + "/metrics.json");
  if (!in) throw data_error("no metrics.json under " + out_dir + "; run train first");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw data_error(std::string("metrics.json: ") + e.what());
  }

  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << "experiment report\n";
  os << "config_hash=" << m.value("config_hash", std::string("?")) << " seed="
     << m.value("seed", 0ull) << "\n\n";

  auto acc_line = [&](const std::string& name, const json& blk) {
    os << "  " << name << ": accuracy " << blk.value("accuracy", 0.0) << ", macro-F1 "
       << blk.value("macro_f1", 0.0) << "\n";
  };
  os << "target test set\n";
  if (m.contains("gtnp")) acc_line("gtnp       ", m["gtnp"]["target_test"]);
  if (m.contains("baselines")) {
    for (auto& [name, blk] : m["baselines"].items())
      acc_line(name, blk["target_test"]);
  }
  if (m.contains("gtnp")) {
    os << "\nper-class F1 (gtnp, target test)\n";
    for (const auto& c : m["gtnp"]["target_test"]["per_class"])
      os << "  class " << c.value("class", -1) << ": f1 " << c.value("f1", 0.0)
         << " (support " << c.value("support", 0) << ")\n";
    os << "\nsource test set\n";
    acc_line("gtnp       ", m["gtnp"]["source_test"]);
  }
  if (m.contains("training")) {
    const json& t = m["training"];
    const json& epochs = t["epochs"];
    os << "\ntraining\n";
    os << "  epochs: " << epochs.size() << "\n";
    if (!epochs.empty()) {
      double kl0 = epochs.front().value("kl_qp_mean", 0.0);
      double kl1 = epochs.back().value("kl_qp_mean", 0.0);
      os << "  kl(q||p) mean: first epoch " << kl0 << ", final epoch " << kl1;
      if (kl0 > 0) os << " (ratio " << kl1 / kl0 << ")";
      os << "\n";
      os << "  global latent variance: initial " << t.value("initial_global_var", 1.0)
         << ", final " << epochs.back()["global_latent"].value("var_avg", 0.0) << "\n";
      os << "  final mean loss: "
         << epochs.back()["mean_loss"].value("total", 0.0) << "\n";
    }
    if (t.contains("gcn") && t["gcn"].contains("final_node_acc"))
      os << "  graph pretraining node accuracy: " << t["gcn"].value("final_node_acc", 0.0)
         << "\n";
  }

  std::ifstream uin(out_dir + "/uncertainty.json");
  if (uin) {
    json u;
    try {
      uin >> u;
      os << "\nuncertainty\n";
      os << "  samples: " << u["samples"].size() << ", draws per sample "
         << u.value("n_draws", 0) << "\n";
      double vmax = 0.0;
      int vid = -1;
      for (const auto& s : u["samples"]) {
        const auto& vars = s["variances"];
        int pred = s.value("pred", 0);
        double v = vars[pred].get<double>();
        if (v > vmax) {
          vmax = v;
          vid = s.value("id", -1);
        }
      }
      os << "  highest predicted-class variance: sample " << vid << " (" << std::scientific
         << vmax << std::fixed << ")\n";
    } catch (const json::exception&) {
      os << "\nuncertainty: present but unreadable\n";
    }
  }

  write_text(out_dir + "/report.txt", os.str());
  info("report: wrote " + out_dir + "/report.txt");
}

}  // namespace gtnp
