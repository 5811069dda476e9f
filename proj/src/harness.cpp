// Configuration parsing (strict keys, flat overrides), manifests, and the
// subcommand implementations behind the CLI.

#include "kdlab/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kdlab/eval.hpp"
#include "kdlab/oracle.hpp"
#include "kdlab/telemetry.hpp"

namespace kdlab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void collect_unknown_keys(const json& node, const std::string& path,
                          const std::map<std::string, std::vector<std::string>>& schema,
                          std::vector<std::string>& unknown) {
  if (!node.is_object()) return;
  const auto it = schema.find(path);
  if (it == schema.end()) return;
  for (const auto& [key, value] : node.items()) {
    if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
      unknown.push_back(path.empty() ? key : path + "." + key);
    } else {
      collect_unknown_keys(value, path.empty() ? key : path + "." + key, schema, unknown);
    }
  }
}

const std::map<std::string, std::vector<std::string>>& config_schema() {
  static const std::map<std::string, std::vector<std::string>> schema{
      {"", {"seed", "task", "data", "teacher", "student", "kd", "sweep"}},
      {"task", {"kind", "vocab_size", "prompt_len", "target_len", "seed"}},
      {"data", {"n_train", "n_valid", "n_test"}},
      {"teacher", {"context_order", "sft_epochs", "sft_learning_rate", "init_scale"}},
      {"student", {"context_order", "sft_epochs", "sft_learning_rate", "init_scale"}},
      {"kd",
       {"policy", "metric", "epsilon", "learning_rate", "epochs", "alpha", "switch_window",
        "switch_threshold", "validation_interval", "student_sampling", "teacher_sampling",
        "mix_probability", "k_skd"}},
      {"kd.student_sampling", {"temperature", "top_p", "greedy"}},
      {"kd.teacher_sampling", {"temperature", "top_p", "greedy"}},
      {"sweep", {"switch_threshold", "switch_window"}},
  };
  return schema;
}

LengthRange range_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument(field + " must be a two-element array [lo, hi]");
  return LengthRange{j[0].get<int>(), j[1].get<int>()};
}

SamplingConfig sampling_from_json(const json& j, const SamplingConfig& defaults) {
  SamplingConfig out = defaults;
  out.temperature = j.value("temperature", out.temperature);
  out.top_p = j.value("top_p", out.top_p);
  out.greedy = j.value("greedy", out.greedy);
  return out;
}

ModelSpecCfg model_spec_from_json(const json& j, const ModelSpecCfg& defaults) {
  ModelSpecCfg out = defaults;
  out.context_order = j.value("context_order", out.context_order);
  out.sft_epochs = j.value("sft_epochs", out.sft_epochs);
  out.sft_learning_rate = j.value("sft_learning_rate", out.sft_learning_rate);
  out.init_scale = j.value("init_scale", out.init_scale);
  return out;
}

json sampling_to_json(const SamplingConfig& s) {
  return json{{"temperature", s.temperature}, {"top_p", s.top_p}, {"greedy", s.greedy}};
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << text;
}

// Refuses to reuse an output directory with a manifest unless forced; there
// is no silent resume.
void prepare_out_dir(const RunOptions& opts) {
  fs::create_directories(opts.out_dir);
  const fs::path manifest = opts.out_dir / "manifest.json";
  if (fs::exists(manifest) && !opts.force)
    throw std::runtime_error("output directory already contains a manifest: " +
                             manifest.string() + " (re-run with --force)");
}

void write_manifest(const ExperimentConfig& cfg, const RunOptions& opts,
                    const std::string& subcommand, const std::vector<std::string>& outputs) {
  const std::string config_json = config_to_json_string(cfg);
  json manifest{{"artifact", "kdlab"},
                {"format_version", 1},
                {"subcommand", subcommand},
                {"seed", cfg.seed},
                {"config", json::parse(config_json)},
                {"config_hash", config_hash_hex(config_json)},
                {"outputs", outputs}};
  write_text_file(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

// A task seed left unset in the config derives from the run seed, so one
// seed fixes the whole experiment.
TaskSpec resolved_task(const ExperimentConfig& cfg) {
  TaskSpec task = cfg.task;
  if (task.seed == 0) task.seed = mix_seed(cfg.seed, fnv1a64("data"));
  return task;
}

struct Workbench {
  DatasetSplits data;
  TabularLM teacher;
  TabularLM student;
};

// Shared setup for distillation runs: datasets, SFTed (frozen) teacher and
// the freshly initialized student.
Workbench prepare_workbench(const ExperimentConfig& cfg) {
  const TaskSpec task = resolved_task(cfg);
  DatasetSplits data = generate_dataset(task, cfg.data.n_train, cfg.data.n_valid, cfg.data.n_test);
  TabularLM teacher0 = TabularLM::random_init(task.vocab, cfg.teacher.context_order,
                                              ModelRole::teacher,
                                              mix_seed(cfg.seed, fnv1a64("init/teacher")),
                                              cfg.teacher.init_scale);
  SftResult sft = sft_teacher(teacher0, data.train, data.valid, cfg.teacher.sft_epochs,
                              cfg.teacher.sft_learning_rate, cfg.seed);
  TabularLM student = TabularLM::random_init(task.vocab, cfg.student.context_order,
                                             ModelRole::student,
                                             mix_seed(cfg.seed, fnv1a64("init/student")),
                                             cfg.student.init_scale);
  return Workbench{std::move(data), std::move(sft.model), std::move(student)};
}

void write_run_artifacts(const DistillResult& run, const fs::path& dir) {
  {
    std::ofstream os(dir / "traces.jsonl");
    for (const TraceLogEntry& e : run.traces)
      os << trace_to_json_line(e.id, e.step, e.trace) << '\n';
  }
  {
    std::ofstream os(dir / "run_log.jsonl");
    for (const StepRecord& r : run.steps) {
      json j{{"type", "step"}, {"step", r.step}, {"id", r.example_id}, {"loss", r.loss}};
      os << j.dump() << '\n';
    }
    for (const Checkpoint& cp : run.checkpoints) {
      json j{{"type", "validation"},
             {"step", cp.step},
             {"val_loss", cp.validation_loss},
             {"accuracy", cp.accuracy}};
      os << j.dump() << '\n';
    }
  }
  {
    std::ofstream os(dir / "report.csv");
    write_report_csv(os, run.report);
  }
  write_text_file(dir / "report.json", report_to_json_string(run.report) + "\n");
}

}  // namespace

void ExperimentConfig::validate() const {
  task.validate();
  if (data.n_train < 1 || data.n_valid < 1 || data.n_test < 1)
    throw std::invalid_argument("data counts must be >= 1");
  if (teacher.context_order < 1 || student.context_order < 1)
    throw std::invalid_argument("context_order must be >= 1");
  if (teacher.sft_epochs < 0) throw std::invalid_argument("teacher.sft_epochs must be >= 0");
  if (!(teacher.init_scale > 0.0) || !(student.init_scale > 0.0))
    throw std::invalid_argument("init_scale must be > 0");
  kd.validate();
  const int max_target =
      (task.kind == TaskKind::weighted_grammar ? task.target_len.hi : task.prompt_len.hi) + 1;
  if (max_target > kd.alpha())
    throw std::invalid_argument("task: maximum target length " + std::to_string(max_target) +
                                " exceeds the decoding limit alpha " +
                                std::to_string(kd.alpha()));
}

ExperimentConfig config_from_json_string(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");

  std::vector<std::string> unknown;
  collect_unknown_keys(j, "", config_schema(), unknown);
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const std::string& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }

  ExperimentConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);

  if (j.contains("task")) {
    const json& t = j["task"];
    cfg.task.kind = task_kind_from_string(t.value("kind", to_string(cfg.task.kind)));
    cfg.task.vocab = Vocab::with_size(t.value("vocab_size", cfg.task.vocab.size));
    if (t.contains("prompt_len")) cfg.task.prompt_len = range_from_json(t["prompt_len"], "task.prompt_len");
    if (t.contains("target_len")) cfg.task.target_len = range_from_json(t["target_len"], "task.target_len");
    cfg.task.seed = t.value("seed", cfg.task.seed);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    cfg.data.n_train = d.value("n_train", cfg.data.n_train);
    cfg.data.n_valid = d.value("n_valid", cfg.data.n_valid);
    cfg.data.n_test = d.value("n_test", cfg.data.n_test);
  }
  if (j.contains("teacher")) cfg.teacher = model_spec_from_json(j["teacher"], cfg.teacher);
  if (j.contains("student")) cfg.student = model_spec_from_json(j["student"], cfg.student);

  if (j.contains("kd")) {
    const json& k = j["kd"];
    cfg.kd.policy.kind = policy_name_from_string(k.value("policy", to_string(cfg.kd.policy.kind)));
    cfg.kd.metric.kind = metric_kind_from_string(k.value("metric", to_string(cfg.kd.metric.kind)));
    cfg.kd.metric.epsilon = k.value("epsilon", cfg.kd.metric.epsilon);
    cfg.kd.learning_rate = k.value("learning_rate", cfg.kd.learning_rate);
    cfg.kd.epochs = k.value("epochs", cfg.kd.epochs);
    cfg.kd.switch_cfg.alpha = k.value("alpha", cfg.kd.switch_cfg.alpha);
    cfg.kd.switch_cfg.window_length = k.value("switch_window", cfg.kd.switch_cfg.window_length);
    cfg.kd.switch_cfg.threshold_multiplier =
        k.value("switch_threshold", cfg.kd.switch_cfg.threshold_multiplier);
    cfg.kd.switch_cfg.metric = cfg.kd.metric;
    cfg.kd.validation_interval = k.value("validation_interval", cfg.kd.validation_interval);
    if (k.contains("student_sampling"))
      cfg.kd.student_sampling = sampling_from_json(k["student_sampling"], cfg.kd.student_sampling);
    if (k.contains("teacher_sampling"))
      cfg.kd.teacher_sampling = sampling_from_json(k["teacher_sampling"], cfg.kd.teacher_sampling);
    cfg.kd.policy.mix_probability = k.value("mix_probability", cfg.kd.policy.mix_probability);
    cfg.kd.policy.k_skd = k.value("k_skd", cfg.kd.policy.k_skd);
  } else {
    cfg.kd.switch_cfg.metric = cfg.kd.metric;
  }
  cfg.kd.seed = cfg.seed;

  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    if (s.contains("switch_threshold"))
      cfg.sweep_threshold = s["switch_threshold"].get<std::vector<double>>();
    if (s.contains("switch_window"))
      cfg.sweep_window = s["switch_window"].get<std::vector<int>>();
    if (cfg.sweep_threshold.empty() || cfg.sweep_window.empty())
      throw std::invalid_argument("sweep grids must be nonempty when present");
  }

  cfg.validate();
  return cfg;
}

std::string config_to_json_string(const ExperimentConfig& cfg) {
  json j{
      {"seed", cfg.seed},
      {"task",
       {{"kind", to_string(cfg.task.kind)},
        {"vocab_size", cfg.task.vocab.size},
        {"prompt_len", {cfg.task.prompt_len.lo, cfg.task.prompt_len.hi}},
        {"target_len", {cfg.task.target_len.lo, cfg.task.target_len.hi}},
        {"seed", cfg.task.seed}}},
      {"data",
       {{"n_train", cfg.data.n_train}, {"n_valid", cfg.data.n_valid}, {"n_test", cfg.data.n_test}}},
      {"teacher",
       {{"context_order", cfg.teacher.context_order},
        {"sft_epochs", cfg.teacher.sft_epochs},
        {"sft_learning_rate", cfg.teacher.sft_learning_rate},
        {"init_scale", cfg.teacher.init_scale}}},
      {"student",
       {{"context_order", cfg.student.context_order},
        {"sft_epochs", cfg.student.sft_epochs},
        {"sft_learning_rate", cfg.student.sft_learning_rate},
        {"init_scale", cfg.student.init_scale}}},
      {"kd",
       {{"policy", to_string(cfg.kd.policy.kind)},
        {"metric", to_string(cfg.kd.metric.kind)},
        {"epsilon", cfg.kd.metric.epsilon},
        {"learning_rate", cfg.kd.learning_rate},
        {"epochs", cfg.kd.epochs},
        {"alpha", cfg.kd.switch_cfg.alpha},
        {"switch_window", cfg.kd.switch_cfg.window_length},
        {"switch_threshold", cfg.kd.switch_cfg.threshold_multiplier},
        {"validation_interval", cfg.kd.validation_interval},
        {"student_sampling", sampling_to_json(cfg.kd.student_sampling)},
        {"teacher_sampling", sampling_to_json(cfg.kd.teacher_sampling)},
        {"mix_probability", cfg.kd.policy.mix_probability},
        {"k_skd", cfg.kd.policy.k_skd}}},
      {"sweep",
       {{"switch_threshold", cfg.sweep_threshold}, {"switch_window", cfg.sweep_window}}}};
  return j.dump(2);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json_string(ss.str());
}

std::string apply_override(const std::string& config_json, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("--set expects dotted.key=value, got: " + assignment);
  std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  std::string pointer = "/";
  for (char c : key) pointer += (c == '.') ? '/' : c;

  json j = json::parse(config_json);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // plain string
  }
  j[json::json_pointer(pointer)] = parsed;
  return j.dump();
}

std::string config_hash_hex(const std::string& config_json) {
  // Canonical form: nlohmann objects keep sorted keys, so dump() is stable.
  const std::string canonical = json::parse(config_json).dump();
  const uint64_t h = fnv1a64(canonical);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

int run_gen_data(const ExperimentConfig& cfg, const RunOptions& opts) {
  prepare_out_dir(opts);
  const TaskSpec task = resolved_task(cfg);
  const DatasetSplits data =
      generate_dataset(task, cfg.data.n_train, cfg.data.n_valid, cfg.data.n_test);
  for (const auto& [name, split] :
       {std::pair{"train", &data.train}, {"valid", &data.valid}, {"test", &data.test}}) {
    std::ofstream os(opts.out_dir / (std::string(name) + ".jsonl"));
    write_examples_jsonl(os, *split);
  }
  write_manifest(cfg, opts, "gen-data", {"train.jsonl", "valid.jsonl", "test.jsonl"});
  return 0;
}

int run_sft_teacher(const ExperimentConfig& cfg, const RunOptions& opts) {
  prepare_out_dir(opts);
  const TaskSpec task = resolved_task(cfg);
  const DatasetSplits data =
      generate_dataset(task, cfg.data.n_train, cfg.data.n_valid, cfg.data.n_test);
  TabularLM teacher0 = TabularLM::random_init(task.vocab, cfg.teacher.context_order,
                                              ModelRole::teacher,
                                              mix_seed(cfg.seed, fnv1a64("init/teacher")),
                                              cfg.teacher.init_scale);
  const SftResult sft = sft_teacher(teacher0, data.train, data.valid, cfg.teacher.sft_epochs,
                                    cfg.teacher.sft_learning_rate, cfg.seed);
  sft.model.save(opts.out_dir / "teacher.json");
  const EvalResult eval =
      evaluate_dataset(sft.model, nullptr, data.test, cfg.kd.alpha(), cfg.kd.metric);
  std::cout << "teacher sft done: validation_nll="
            << sft.checkpoints.back().validation_loss << " test_accuracy=" << eval.accuracy
            << "\n";
  write_manifest(cfg, opts, "sft-teacher", {"teacher.json"});
  return 0;
}

int run_distill(const ExperimentConfig& cfg, const RunOptions& opts) {
  prepare_out_dir(opts);
  Workbench bench = prepare_workbench(cfg);
  const DistillResult run =
      distill(bench.teacher, bench.student, bench.data.train, bench.data.valid, bench.data.test,
              cfg.kd);
  run.student.save(opts.out_dir / "student.json");
  bench.teacher.save(opts.out_dir / "teacher.json");
  write_run_artifacts(run, opts.out_dir);
  const Checkpoint* best = &run.checkpoints.front();
  for (const Checkpoint& cp : run.checkpoints)
    if (cp.validation_loss < best->validation_loss) best = &cp;
  std::cout << "distill done: policy=" << to_string(cfg.kd.policy.kind)
            << " best_step=" << best->step << " val_loss=" << best->validation_loss
            << " test_accuracy=" << best->accuracy << "\n";
  write_manifest(cfg, opts, "distill",
                 {"student.json", "teacher.json", "traces.jsonl", "run_log.jsonl", "report.csv",
                  "report.json"});
  return 0;
}

int run_compare(const ExperimentConfig& cfg, const RunOptions& opts) {
  prepare_out_dir(opts);
  Workbench bench = prepare_workbench(cfg);

  static constexpr PolicyName kAll[] = {PolicyName::sft,       PolicyName::seqkd,
                                        PolicyName::off_policy_kd, PolicyName::on_policy_kd,
                                        PolicyName::imitkd,    PolicyName::skd,
                                        PolicyName::adaswitch};
  std::ostringstream csv;
  csv << "policy,accuracy,val_loss,s_calls,t_calls\n";
  for (PolicyName p : kAll) {
    KDConfig kd = cfg.kd;
    kd.policy.kind = p;
    const DistillResult run =
        distill(bench.teacher, bench.student, bench.data.train, bench.data.valid,
                bench.data.test, kd);
    const Checkpoint* best = &run.checkpoints.front();
    for (const Checkpoint& cp : run.checkpoints)
      if (cp.validation_loss < best->validation_loss) best = &cp;
    const WindowStats& last = run.report.windows.back();
    csv << to_string(p) << ',' << best->accuracy << ',' << best->validation_loss << ','
        << last.cum_student_calls << ',' << last.cum_teacher_calls << '\n';
    std::cout << "compare " << to_string(p) << ": accuracy=" << best->accuracy
              << " val_loss=" << best->validation_loss << "\n";
  }
  write_text_file(opts.out_dir / "compare.csv", csv.str());
  write_manifest(cfg, opts, "compare", {"compare.csv"});
  return 0;
}

int run_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  prepare_out_dir(opts);
  Workbench bench = prepare_workbench(cfg);

  std::ostringstream csv;
  csv << "switch_threshold,switch_window,accuracy,val_loss,final_switch_rate,s_calls,t_calls\n";
  for (double threshold : cfg.sweep_threshold) {
    for (int window : cfg.sweep_window) {
      KDConfig kd = cfg.kd;
      kd.policy.kind = PolicyName::adaswitch;
      kd.switch_cfg.threshold_multiplier = threshold;
      kd.switch_cfg.window_length = window;
      const DistillResult run =
          distill(bench.teacher, bench.student, bench.data.train, bench.data.valid,
                  bench.data.test, kd);
      const Checkpoint* best = &run.checkpoints.front();
      for (const Checkpoint& cp : run.checkpoints)
        if (cp.validation_loss < best->validation_loss) best = &cp;
      const WindowStats& last = run.report.windows.back();
      csv << threshold << ',' << window << ',' << best->accuracy << ','
          << best->validation_loss << ',' << last.switch_rate << ',' << last.cum_student_calls
          << ',' << last.cum_teacher_calls << '\n';
      std::cout << "sweep threshold=" << threshold << " window=" << window
                << ": accuracy=" << best->accuracy << "\n";
    }
  }
  write_text_file(opts.out_dir / "sweep.csv", csv.str());
  write_manifest(cfg, opts, "sweep", {"sweep.csv"});
  return 0;
}

int run_oracle_check(const ExperimentConfig& cfg, const RunOptions& opts) {
  prepare_out_dir(opts);
  const Vocab vocab = Vocab::with_size(4);
  const TabularLM teacher = TabularLM::random_init(
      vocab, 2, ModelRole::teacher, mix_seed(cfg.seed, fnv1a64("oracle/teacher")), 1.0);
  const TabularLM student = TabularLM::random_init(
      vocab, 1, ModelRole::student, mix_seed(cfg.seed, fnv1a64("oracle/student")), 1.0);
  const TokenSeq prompt{vocab.bos};
  const SamplingConfig soft{1.0, 1.0, false};
  SwitchConfig sw;
  sw.window_length = 1;
  sw.threshold_multiplier = 1.5;
  sw.alpha = 4;
  const DivergenceMetric metric{MetricKind::forward_kl, 1e-12};
  EnumerationSpec spec{4};

  bool all_ok = true;
  json results = json::array();
  for (OraclePolicy policy :
       {OraclePolicy::on_policy, OraclePolicy::seqkd, OraclePolicy::adaswitch}) {
    const char* name = policy == OraclePolicy::on_policy ? "on_policy"
                       : policy == OraclePolicy::seqkd   ? "seqkd"
                                                         : "adaswitch";
    const ExactDivergence exact = exact_expected_sequence_divergence(
        policy, teacher, student, prompt, soft, soft, sw, metric, spec);
    const bool prob_ok = std::abs(exact.total_probability - 1.0) <= 1e-9;
    all_ok &= prob_ok;
    std::cout << "oracle-check " << name << ": exact=" << exact.value
              << " total_probability=" << exact.total_probability << " traces="
              << exact.trace_count << (prob_ok ? " PASS" : " FAIL") << "\n";
    results.push_back({{"policy", name},
                       {"exact", exact.value},
                       {"total_probability", exact.total_probability},
                       {"traces", exact.trace_count},
                       {"pass", prob_ok}});
  }

  // Replay a batch of generated traces through the independent checker.
  int replay_failures = 0;
  const int n_traces = 200;
  SwitchConfig replay_cfg;
  replay_cfg.window_length = 3;
  replay_cfg.threshold_multiplier = 1.2;
  replay_cfg.alpha = 16;
  for (int i = 0; i < n_traces; ++i) {
    Example ex;
    ex.id = "oracle";
    ex.prompt = prompt;
    ex.target = {vocab.eos};
    Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(i)));
    const GenerationTrace trace =
        adaswitch_generate(student, teacher, ex, soft, soft, replay_cfg, rng);
    if (!replay_switch_check(trace, replay_cfg)) ++replay_failures;
  }
  const bool replay_ok = replay_failures == 0;
  all_ok &= replay_ok;
  std::cout << "oracle-check replay: " << (n_traces - replay_failures) << "/" << n_traces
            << " traces verified " << (replay_ok ? "PASS" : "FAIL") << "\n";
  results.push_back({{"policy", "replay"}, {"failures", replay_failures}, {"pass", replay_ok}});

  write_text_file(opts.out_dir / "oracle_check.json", results.dump(2) + "\n");
  write_manifest(cfg, opts, "oracle-check", {"oracle_check.json"});
  return all_ok ? 0 : 1;
}

int run_report(const std::filesystem::path& run_dir, const RunOptions& opts) {
  std::ifstream manifest_in(run_dir / "manifest.json");
  if (!manifest_in)
    throw std::runtime_error("run directory has no manifest.json: " + run_dir.string());
  json manifest = json::parse(manifest_in);
  const int window_size = manifest.at("config").at("kd").at("validation_interval").get<int>();

  std::vector<TraceLogEntry> traces;
  {
    std::ifstream is(run_dir / "traces.jsonl");
    if (!is) throw std::runtime_error("missing traces.jsonl in " + run_dir.string());
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) traces.push_back(trace_from_json_line(line));
  }
  std::vector<StepLoss> losses;
  std::vector<ValidationPoint> validations;
  {
    std::ifstream is(run_dir / "run_log.jsonl");
    if (!is) throw std::runtime_error("missing run_log.jsonl in " + run_dir.string());
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.at("type") == "step") {
        losses.push_back({j.at("step").get<int64_t>(), j.at("loss").get<double>()});
      } else {
        validations.push_back({j.at("step").get<int64_t>(), j.at("val_loss").get<double>(),
                               j.at("accuracy").get<double>()});
      }
    }
  }

  fs::create_directories(opts.out_dir);
  const RunReport report = build_report(traces, losses, validations, window_size);
  {
    std::ofstream os(opts.out_dir / "report.csv");
    write_report_csv(os, report);
  }
  write_text_file(opts.out_dir / "report.json", report_to_json_string(report) + "\n");
  return 0;
}

}  // namespace kdlab
