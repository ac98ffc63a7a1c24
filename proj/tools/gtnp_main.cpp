// Command-line front end: config-driven experiment pipeline.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric abort.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gtnp/errors.hpp"
#include "gtnp/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, CommonArgs& a, bool config_required = true) {
  auto* c = app->add_option("--config", a.config, "experiment config JSON");
  if (config_required) c->required();
  app->add_option_function<std::uint64_t>(
      "--seed", [&a](std::uint64_t v) { a.seed = v; }, "override the config seed");
  app->add_option_function<std::string>(
      "--out", [&a](const std::string& v) { a.out = v; }, "override the output directory");
}

gtnp::ExperimentConfig load(const CommonArgs& a) {
  return gtnp::load_experiment_config(a.config, a.seed, a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-conditioned transfer diagnosis toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, gcn_args, train_args, unc_args;
  std::string prep_manifest, prep_out = "out";
  std::string eval_ckpt, eval_data, eval_out = "out";
  std::string unc_ckpt, unc_data;
  std::string report_dir;

  auto* synth = app.add_subcommand("synth", "generate synthetic source/target datasets");
  add_common(synth, synth_args);

  auto* prepare = app.add_subcommand("prepare", "window and serialize raw signals");
  prepare->add_option("--config", prep_manifest, "signal manifest JSON")->required();
  prepare->add_option("--out", prep_out, "output directory");

  auto* gcn = app.add_subcommand("pretrain-gcn", "pretrain the dependency-graph network");
  add_common(gcn, gcn_args);

  auto* train = app.add_subcommand("train", "run the full transfer training pipeline");
  add_common(train, train_args);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint archive")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "output directory");

  auto* unc = app.add_subcommand("uncertainty", "multi-draw uncertainty report");
  add_common(unc, unc_args);
  unc->add_option("--checkpoint", unc_ckpt, "checkpoint archive")->required();
  unc->add_option("--data", unc_data, "dataset directory")->required();

  auto* report = app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("--out", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) gtnp::cmd_synth(load(synth_args));
    if (prepare->parsed()) gtnp::cmd_prepare(prep_manifest, prep_out);
    if (gcn->parsed()) gtnp::cmd_pretrain_gcn(load(gcn_args));
    if (train->parsed()) gtnp::cmd_train(load(train_args));
    if (eval->parsed()) gtnp::cmd_eval(eval_ckpt, eval_data, eval_out);
    if (unc->parsed()) gtnp::cmd_uncertainty(load(unc_args), unc_ckpt, unc_data);
    if (report->parsed()) gtnp::cmd_report(report_dir);
  } catch (const gtnp::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gtnp::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const gtnp::numeric_error& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
