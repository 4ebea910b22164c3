#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "sdrnn/checkpoint.hpp"
#include "sdrnn/data.hpp"
#include "sdrnn/pipeline.hpp"
#include "sdrnn/train.hpp"

using namespace sdrnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitThreshold = 3;
constexpr int kExitIo = 4;

constexpr double kGradcheckThreshold = 1e-4;

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot write output directory: " + out);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::map<std::string, std::string> config_map(const KVConfig& kv) {
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : kv.entries()) m[k] = v;
  return m;
}

std::string metric_or(const MetricValue& m) {
  return m.defined() ? fmt(m.get()) : std::string("undefined");
}

std::string render_eval_report(const EvalReport& rep) {
  std::ostringstream os;
  os << "row\tAUPRC\tAUROC\n";
  os << "pooled\t" << metric_or(rep.pooled.ap) << "\t"
     << metric_or(rep.pooled.roc) << "\n";
  for (int k = 0; k < kNumLabels; ++k) {
    os << kLabelNames[k] << "\t" << metric_or(rep.per_endpoint[k].ap) << "\t"
       << metric_or(rep.per_endpoint[k].roc) << "\n";
  }
  return os.str();
}

std::string render_history(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch\ttrain_loss\tval_auprc\n";
  for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
    os << e << "\t" << fmt(h.train_loss[e]) << "\t";
    const double v = h.val_auprc[e];
    os << (std::isnan(v) ? std::string("undefined") : fmt(v)) << "\n";
  }
  os << "# best_epoch=" << h.best_epoch
     << " best_val_auprc=" << fmt(h.best_val_auprc) << "\n";
  return os.str();
}

std::vector<Arch> parse_models(const std::string& csv) {
  std::vector<Arch> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto a = parse_arch(item);
    if (!a) throw std::invalid_argument("unknown model '" + item + "'");
    out.push_back(*a);
  }
  if (out.empty()) throw std::invalid_argument("empty model list");
  return out;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, std::uint64_t seed,
              const std::string& out) {
  Timer timer;
  KVConfig kv = config_path.empty() ? KVConfig::from_string("")
                                    : KVConfig::from_file(config_path);
  GenConfig cfg = GenConfig::from_kv(kv);
  kv.reject_unknown_keys();
  if (cfg.patients == 0) {
    throw std::invalid_argument("synth: patients must be positive");
  }

  Cohort cohort = generate_cohort(cfg, seed);
  ensure_out_dir(out);
  const std::string cohort_path = join(out, "cohort.jsonl");
  const std::string vocab_path = join(out, "vocab.json");
  save_cohort(cohort, cohort_path, vocab_path);

  CohortSummary s = summarize(cohort);
  std::ostringstream rep;
  rep << "patients\t" << s.patients << "\n"
      << "visits\t" << s.visits << "\n"
      << "evaluable_visits\t" << s.evaluable_visits << "\n"
      << "target_density\t" << fmt(s.target_density) << "\n"
      << "endpoint_patient_frac\t" << fmt(s.endpoint_patient_frac) << "\n";
  write_text(join(out, "summary.tsv"), rep.str());
  std::cout << rep.str();

  auto cm = config_map(kv);
  cm["seed"] = std::to_string(seed);
  write_manifest(join(out, "manifest.json"), "synth", cm,
                 config_path.empty() ? std::vector<std::string>{}
                                     : std::vector<std::string>{config_path},
                 timer.seconds());
  return kExitOk;
}

int cmd_train(const std::string& cohort_path, const std::string& vocab_path,
              const std::string& arch_s, const std::string& config_path,
              std::uint64_t seed, std::uint64_t split_seed,
              const std::string& out, bool degraded) {
  Timer timer;
  auto arch = parse_arch(arch_s);
  if (!arch) throw std::invalid_argument("unknown arch '" + arch_s + "'");

  KVConfig kv = config_path.empty() ? KVConfig::from_string("")
                                    : KVConfig::from_file(config_path);
  TrainConfig cfg = TrainConfig::from_kv(kv);
  kv.reject_unknown_keys();
  cfg.seed = seed;

  Cohort cohort = load_cohort(cohort_path, vocab_path);
  SplitData split = make_split(cohort, split_seed, degraded);
  FitResult r = train_on_split(*arch, split, cfg, split_seed);

  ensure_out_dir(out);
  Checkpoint ck = checkpoint_from_net(*r.net, cfg);
  ck.metadata["degraded"] = degraded ? "1" : "0";
  ck.metadata["split_seed"] = std::to_string(split_seed);
  save_checkpoint(ck, join(out, "checkpoint.bin"));
  write_text(join(out, "history.tsv"), render_history(r.history));

  auto cm = config_map(kv);
  cm["arch"] = arch_s;
  cm["seed"] = std::to_string(seed);
  cm["split_seed"] = std::to_string(split_seed);
  cm["degraded"] = degraded ? "1" : "0";
  write_manifest(join(out, "manifest.json"), "train", cm,
                 {cohort_path, vocab_path}, timer.seconds());
  return kExitOk;
}

int cmd_evaluate(const std::string& checkpoint_path,
                 const std::string& cohort_path, const std::string& vocab_path,
                 std::uint64_t split_seed, const std::string& out) {
  Timer timer;
  Checkpoint ck = load_checkpoint(checkpoint_path);
  auto net = net_from_checkpoint(ck);
  const bool degraded = ck.metadata.count("degraded") &&
                        ck.metadata.at("degraded") == "1";

  Cohort cohort = load_cohort(cohort_path, vocab_path);
  SplitData split = make_split(cohort, split_seed, degraded);
  if (split.enc.static_dim != net->dims().static_dim ||
      split.enc.dynamic_dim != net->dims().dynamic_dim) {
    throw std::invalid_argument(
        "checkpoint dimensions (" + std::to_string(net->dims().static_dim) +
        " static, " + std::to_string(net->dims().dynamic_dim) +
        " dynamic) do not match the cohort vocabulary (" +
        std::to_string(split.enc.static_dim) + " static, " +
        std::to_string(split.enc.dynamic_dim) + " dynamic)");
  }

  EvalReport rep = eval_on_test(*net, split);
  ensure_out_dir(out);
  write_text(join(out, "report.tsv"), render_eval_report(rep));
  std::cout << render_eval_report(rep);

  write_manifest(join(out, "manifest.json"), "evaluate",
                 {{"split_seed", std::to_string(split_seed)},
                  {"degraded", degraded ? "1" : "0"}},
                 {checkpoint_path, cohort_path, vocab_path}, timer.seconds());
  return kExitOk;
}

int cmd_benchmark(const std::string& cohort_path, const std::string& vocab_path,
                  const std::string& models_csv, const std::string& config_path,
                  std::uint64_t seed, std::size_t n_splits,
                  const std::string& out, bool degraded) {
  Timer timer;
  std::vector<Arch> models = parse_models(models_csv);

  KVConfig kv = config_path.empty() ? KVConfig::from_string("")
                                    : KVConfig::from_file(config_path);
  TrainConfig cfg = TrainConfig::from_kv(kv);
  kv.reject_unknown_keys();
  cfg.seed = seed;

  std::vector<std::uint64_t> split_seeds;
  for (std::size_t j = 0; j < n_splits; ++j) split_seeds.push_back(seed + j);

  Cohort cohort = load_cohort(cohort_path, vocab_path);
  BenchmarkResult res = run_benchmark(cohort, models, cfg, split_seeds,
                                      degraded);

  ensure_out_dir(out);
  const std::string table = render_benchmark_table(res);
  write_text(join(out, "benchmark.tsv"), table);
  std::cout << table;

  std::ostringstream digests;
  for (std::uint64_t d : res.split_digests) digests << d << "\n";
  write_text(join(out, "split_digests.txt"), digests.str());

  auto cm = config_map(kv);
  cm["models"] = models_csv;
  cm["seed"] = std::to_string(seed);
  cm["splits"] = std::to_string(n_splits);
  cm["degraded"] = degraded ? "1" : "0";
  write_manifest(join(out, "manifest.json"), "benchmark",
                 cm, {cohort_path, vocab_path}, timer.seconds());
  return kExitOk;
}

int cmd_gradcheck(const std::string& arch_s, std::uint64_t seed) {
  std::vector<Arch> archs;
  if (arch_s.empty()) {
    archs = gradcheck_archs();
  } else {
    auto a = parse_arch(arch_s);
    if (!a) throw std::invalid_argument("unknown arch '" + arch_s + "'");
    archs.push_back(*a);
  }

  bool ok = true;
  for (Arch a : archs) {
    GradCheckReport rep = gradcheck_arch(a, seed);
    for (const auto& [name, err] : rep.per_tensor) {
      std::cout << arch_name(a) << "\t" << name << "\t" << fmt(err) << "\n";
    }
    const bool pass = rep.max_rel_err < kGradcheckThreshold;
    std::cout << arch_name(a) << "\tmax\t" << fmt(rep.max_rel_err) << "\t"
              << (pass ? "pass" : "FAIL") << "\n";
    ok = ok && pass;
  }
  return ok ? kExitOk : kExitThreshold;
}

int cmd_predict(const std::string& checkpoint_path,
                const std::string& cohort_path, const std::string& vocab_path,
                const std::string& out) {
  Timer timer;
  Checkpoint ck = load_checkpoint(checkpoint_path);
  auto net = net_from_checkpoint(ck);
  const bool degraded = ck.metadata.count("degraded") &&
                        ck.metadata.at("degraded") == "1";

  Cohort cohort = load_cohort(cohort_path, vocab_path);
  std::vector<const PatientRecord*> all;
  for (const auto& p : cohort.patients) all.push_back(&p);
  EncodedCohort enc = encode_cohort(cohort, all, degraded);
  if (enc.static_dim != net->dims().static_dim ||
      enc.dynamic_dim != net->dims().dynamic_dim) {
    throw std::invalid_argument(
        "checkpoint dimensions do not match the cohort vocabulary");
  }

  std::vector<const EncodedPatient*> ptrs;
  for (const auto& p : enc.patients) ptrs.push_back(&p);
  std::vector<PredictionRow> rows = predict_cohort(*net, ptrs);

  std::ostringstream os;
  for (const auto& r : rows) {
    os << r.patient_id << "\t" << r.visit;
    for (int k = 0; k < kNumLabels; ++k) os << "\t" << fmt(r.prob[k]);
    os << "\n";
  }
  ensure_out_dir(out);
  write_text(join(out, "predictions.tsv"), os.str());

  write_manifest(join(out, "manifest.json"), "predict",
                 {{"degraded", degraded ? "1" : "0"}},
                 {checkpoint_path, cohort_path, vocab_path}, timer.seconds());
  return kExitOk;
}

bool is_io_error(const std::exception& e) {
  const std::string msg = e.what();
  return msg.rfind("cannot open", 0) == 0 || msg.rfind("cannot write", 0) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequence models for longitudinal clinical endpoint prediction"};
  app.require_subcommand(1);

  std::string config_path, out = ".", arch_s, cohort_path, vocab_path;
  std::string checkpoint_path, models_csv = "gru,lstm,rnn,tle,logreg,random";
  std::uint64_t seed = 1, split_seed = 1;
  std::size_t n_splits = 5;
  bool degraded = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("--config", config_path, "generator key=value config");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train one model on one split");
  train->add_option("--cohort", cohort_path)->required();
  train->add_option("--vocab", vocab_path)->required();
  train->add_option("--arch", arch_s, "rnn|lstm|gru|tle|logreg|static|random")
      ->required();
  train->add_option("--config", config_path, "training key=value config");
  train->add_option("--seed", seed, "training seed");
  train->add_option("--split-seed", split_seed, "split seed");
  train->add_flag("--degraded-preprocessing", degraded,
                  "mean-imputed standardized labs instead of three buckets");
  train->add_option("--out", out)->required();

  auto* evaluate = app.add_subcommand("evaluate",
                                      "evaluate a checkpoint on a test split");
  evaluate->add_option("--checkpoint", checkpoint_path)->required();
  evaluate->add_option("--cohort", cohort_path)->required();
  evaluate->add_option("--vocab", vocab_path)->required();
  evaluate->add_option("--split-seed", split_seed)->required();
  evaluate->add_option("--out", out)->required();

  auto* benchmark = app.add_subcommand(
      "benchmark", "train every model on shared splits and tabulate");
  benchmark->add_option("--cohort", cohort_path)->required();
  benchmark->add_option("--vocab", vocab_path)->required();
  benchmark->add_option("--models", models_csv, "comma-separated model list");
  benchmark->add_option("--config", config_path);
  benchmark->add_option("--seed", seed);
  benchmark->add_option("--splits", n_splits, "number of split seeds");
  benchmark->add_flag("--degraded-preprocessing", degraded);
  benchmark->add_option("--out", out)->required();

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of analytic gradients");
  gradcheck->add_option("--arch", arch_s, "single architecture (default: all)");
  gradcheck->add_option("--seed", seed);

  auto* predict = app.add_subcommand(
      "predict", "per-visit probabilities for a cohort against a checkpoint");
  predict->add_option("--checkpoint", checkpoint_path)->required();
  predict->add_option("--cohort", cohort_path)->required();
  predict->add_option("--vocab", vocab_path)->required();
  predict->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (synth->parsed()) return cmd_synth(config_path, seed, out);
    if (train->parsed()) {
      return cmd_train(cohort_path, vocab_path, arch_s, config_path, seed,
                       split_seed, out, degraded);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(checkpoint_path, cohort_path, vocab_path, split_seed,
                          out);
    }
    if (benchmark->parsed()) {
      return cmd_benchmark(cohort_path, vocab_path, models_csv, config_path,
                           seed, n_splits, out, degraded);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(arch_s, seed);
    if (predict->parsed()) {
      return cmd_predict(checkpoint_path, cohort_path, vocab_path, out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_io_error(e) ? kExitIo : kExitValidation;
  }
  return kExitValidation;
}
