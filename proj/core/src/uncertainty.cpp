// Multi-scale uncertainty: global-latent statistics per epoch and
// Monte-Carlo local uncertainty with KDE summaries.

#include "gtnp/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gtnp/errors.hpp"
#include "gtnp/kde.hpp"

namespace gtnp {

using nlohmann::json;

GlobalTraceRecord track_global(const TrainState& s, int epoch) {
  GlobalTraceRecord rec;
  rec.epoch = epoch;
  const Tensor& m = s.global.mean.value;
  const Tensor& lv = s.global.logvar.value;
  std::vector<double> vars(lv.data.size());
  for (size_t i = 0; i < vars.size(); ++i) vars[i] = std::exp(lv.data[i]);
  rec.mean_avg = exact_sum(m.data.data(), static_cast<int64_t>(m.data.size())) /
                 static_cast<double>(m.data.size());
  rec.var_avg = exact_sum(vars.data(), static_cast<int64_t>(vars.size())) /
                static_cast<double>(vars.size());
  return rec;
}

LocalUncertainty local_uncertainty(const TrainState& s, const Tensor& x, int n_draws,
                                   uint64_t seed, int sample_id) {
  if (n_draws < 1) throw config_error("local_uncertainty needs n_draws >= 1");
  if (x.ndim() != 2 || x.dim(0) != s.in_h || x.dim(1) != s.in_w)
    throw shape_error("local_uncertainty sample shape mismatch");

  // Deterministic part shared by all draws.
  Tensor x4({1, 1, s.in_h, s.in_w});
  std::copy(x.data.begin(), x.data.end(), x4.data.begin());
  Tensor feats = s.extractor.infer(x4);
  Tensor h = augment_with_global(feats, s.global.mean.value);
  auto [mu_u, lv_u] = s.embed.infer(h);
  int d_u = s.dims.d_u, classes = s.label_space;

  RandomStream rng = derive_stream(seed, "uncertainty", static_cast<uint64_t>(sample_id));
  LocalUncertainty out;
  out.sample_id = sample_id;
  out.n_draws = n_draws;
  out.draws = Tensor({n_draws, classes});
  std::vector<double> mean_logp(static_cast<size_t>(classes), 0.0);

  Tensor u({1, d_u});
  for (int k = 0; k < n_draws; ++k) {
    for (int j = 0; j < d_u; ++j)
      u.at(0, j) = mu_u.at(0, j) + std::exp(0.5 * lv_u.at(0, j)) * rng.normal();
    Tensor z = s.est.infer(u).first;
    Tensor logits = scale(
        linear(concat_cols(z, u), s.classifier.w.value, s.classifier.b.value), kOutputScale);
    Tensor logp = log_softmax_rows(logits);
    for (int c = 0; c < classes; ++c) {
      out.draws.at(k, c) = std::exp(logp.at(0, c));
      mean_logp[static_cast<size_t>(c)] += logp.at(0, c);
    }
  }
  for (double& v : mean_logp) v /= n_draws;

  // Normalized scores: softmax of per-class mean log-probabilities.
  double mx = *std::max_element(mean_logp.begin(), mean_logp.end());
  double denom = 0.0;
  out.scores.resize(static_cast<size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    out.scores[static_cast<size_t>(c)] = std::exp(mean_logp[static_cast<size_t>(c)] - mx);
    denom += out.scores[static_cast<size_t>(c)];
  }
  for (double& v : out.scores) v /= denom;

  out.variances.assign(static_cast<size_t>(classes), 0.0);
  for (int c = 0; c < classes; ++c) {
    double mean = 0.0;
    for (int k = 0; k < n_draws; ++k) mean += out.draws.at(k, c);
    mean /= n_draws;
    double acc = 0.0;
    for (int k = 0; k < n_draws; ++k) {
      double d = out.draws.at(k, c) - mean;
      acc += d * d;
    }
    out.variances[static_cast<size_t>(c)] = acc / n_draws;
  }
  out.predicted = static_cast<int>(
      std::max_element(out.scores.begin(), out.scores.end()) - out.scores.begin());
  return out;
}

void uncertainty_report(const TrainState& s, const DomainDataset& ds, SetTag tag,
                        const std::vector<GlobalTraceRecord>& trace,
                        const UncertaintyReportConfig& cfg, const std::string& out_dir) {
  std::vector<int> idx = ds.indices_with(tag);
  if (idx.empty()) throw data_error("uncertainty_report on empty sample set");

  json rep;
  rep["config_hash"] = cfg.config_hash;
  rep["seed"] = cfg.seed;
  rep["n_draws"] = cfg.n_draws;

  json gtrace = json::array();
  for (const auto& r : trace)
    gtrace.push_back({{"epoch", r.epoch}, {"mean_avg", r.mean_avg}, {"var_avg", r.var_avg}});
  rep["global_trace"] = gtrace;

  json samples = json::array();
  std::vector<LocalUncertainty> selected;
  for (int i : idx) {
    const LabeledSample& smp = ds.samples[static_cast<size_t>(i)];
    LocalUncertainty lu = local_uncertainty(s, smp.matrix, cfg.n_draws, cfg.seed, smp.id);
    samples.push_back({{"id", smp.id},
                       {"label", smp.label},
                       {"pred", lu.predicted},
                       {"scores", lu.scores},
                       {"variances", lu.variances}});
    if (std::find(cfg.selected_ids.begin(), cfg.selected_ids.end(), smp.id) !=
        cfg.selected_ids.end())
      selected.push_back(std::move(lu));
  }
  rep["samples"] = samples;

  json kde = json::object();
  {
    // Pooled draws from the global latent across dimensions.
    const Tensor& m = s.global.mean.value;
    const Tensor& lv = s.global.logvar.value;
    int d_g = m.dim(1), per_dim = (2000 + d_g - 1) / d_g;
    RandomStream rng = derive_stream(cfg.seed, "kde-global");
    std::vector<double> draws;
    draws.reserve(static_cast<size_t>(per_dim) * d_g);
    for (int j = 0; j < d_g; ++j) {
      double sd = std::exp(0.5 * lv.at(0, j));
      for (int k = 0; k < per_dim; ++k) draws.push_back(m.at(0, j) + sd * rng.normal());
    }
    auto [lo, hi] = std::minmax_element(draws.begin(), draws.end());
    double bw = silverman_bandwidth(draws);
    std::vector<double> grid = linspace(*lo - 3.0 * bw, *hi + 3.0 * bw, 256);
    kde["global_latent"] = {{"grid", grid}, {"density", kde_estimate(draws, grid, bw)}};
  }
  if (!selected.empty()) {
    json blocks = json::array();
    for (const LocalUncertainty& lu : selected) {
      for (int c = 0; c < s.label_space; ++c) {
        std::vector<double> col(static_cast<size_t>(lu.n_draws));
        for (int k = 0; k < lu.n_draws; ++k) col[static_cast<size_t>(k)] = lu.draws.at(k, c);
        std::vector<double> grid = linspace(0.0, 1.0, 101);
        blocks.push_back({{"id", lu.sample_id},
                          {"class", c},
                          {"grid", grid},
                          {"density", kde_estimate(col, grid)}});
      }
    }
    kde["sample_probabilities"] = blocks;
  }
  rep["kde"] = kde;

  std::ofstream os(out_dir + "/uncertainty.json");
  if (!os) throw data_error("cannot write uncertainty report in " + out_dir);
  os << rep.dump(2) << "\n";

  for (const LocalUncertainty& lu : selected) {
    std::string path = out_dir + "/draws_sample_" + std::to_string(lu.sample_id) + ".csv";
    std::ofstream cs(path);
    if (!cs) throw data_error("cannot write " + path);
    cs << "# config_hash=" << cfg.config_hash << " seed=" << cfg.seed << "\n";
    cs << "# per-draw class probabilities, one draw per row\n";
    cs.precision(17);
    for (int k = 0; k < lu.n_draws; ++k) {
      for (int c = 0; c < s.label_space; ++c)
        cs << (c ? "," : "") << lu.draws.at(k, c);
      cs << "\n";
    }
  }
}

}  // namespace gtnp
