// kdlab command-line interface: dataset emission, teacher fine-tuning,
// distillation runs, baseline comparisons, hyperparameter sweeps, oracle
// checks and report re-derivation.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdlab/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::string run_dir;  // report only
  uint64_t seed = 0;
  bool seed_set = false;
  std::string policy;
  bool force = false;
};

kdlab::ExperimentConfig resolve_config(const CommonArgs& args) {
  std::string config_json = "{}";
  if (!args.config_path.empty()) {
    std::ifstream is(args.config_path);
    if (!is) throw std::runtime_error("cannot open config file: " + args.config_path);
    std::stringstream ss;
    ss << is.rdbuf();
    config_json = ss.str();
    kdlab::config_from_json_string(config_json);  // validate before overriding
  }
  for (const std::string& assignment : args.overrides)
    config_json = kdlab::apply_override(config_json, assignment);
  if (args.seed_set) config_json = kdlab::apply_override(config_json, "seed=" + std::to_string(args.seed));
  if (!args.policy.empty())
    config_json = kdlab::apply_override(config_json, "kd.policy=\"" + args.policy + "\"");
  return kdlab::config_from_json_string(config_json);
}

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool with_config = true) {
  if (with_config) {
    cmd->add_option("--config", args.config_path, "JSON configuration file");
    cmd->add_option("--set", args.overrides, "Override a config key, dotted.key=value");
    cmd->add_option("--seed", args.seed, "Run seed override")->each([&](const std::string&) {
      args.seed_set = true;
    });
    cmd->add_option("--policy", args.policy, "Policy override (sft, seqkd, off_policy_kd, "
                                             "on_policy_kd, imitkd, skd, adaswitch)");
  }
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_flag("--force", args.force, "Overwrite an existing run in the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kdlab: token-level knowledge distillation laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* gen = app.add_subcommand("gen-data", "Emit dataset splits as JSONL");
  CLI::App* sft = app.add_subcommand("sft-teacher", "Fine-tune and save the teacher");
  CLI::App* dist = app.add_subcommand("distill", "Run one distillation policy");
  CLI::App* cmp = app.add_subcommand("compare", "Run all policies on identical data and seeds");
  CLI::App* sweep = app.add_subcommand("sweep", "Grid over switch threshold and window length");
  CLI::App* oracle = app.add_subcommand("oracle-check", "Enumeration and replay verification");
  CLI::App* report = app.add_subcommand("report", "Re-derive report CSV/JSON from trace logs");
  for (CLI::App* cmd : {gen, sft, dist, cmp, sweep, oracle}) add_common_flags(cmd, args);
  add_common_flags(report, args, false);
  report->add_option("--run", args.run_dir, "Directory of a finished distill run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const kdlab::RunOptions opts{args.out_dir, args.force};
    if (report->parsed()) return kdlab::run_report(args.run_dir, opts);
    const kdlab::ExperimentConfig cfg = resolve_config(args);
    if (gen->parsed()) return kdlab::run_gen_data(cfg, opts);
    if (sft->parsed()) return kdlab::run_sft_teacher(cfg, opts);
    if (dist->parsed()) return kdlab::run_distill(cfg, opts);
    if (cmp->parsed()) return kdlab::run_compare(cfg, opts);
    if (sweep->parsed()) return kdlab::run_sweep(cfg, opts);
    if (oracle->parsed()) return kdlab::run_oracle_check(cfg, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
