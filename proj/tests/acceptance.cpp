// End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
// binary exits nonzero if any check fails. Optional argv: criterion numbers
// to run (default: all).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sdrnn/checkpoint.hpp"
#include "sdrnn/pipeline.hpp"

using namespace sdrnn;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, bool ok, const std::string& what) {
  std::printf("[%2d] %s %s\n", n, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double median5(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// 1. full-architecture gradient check

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string detail;
  for (Arch a : gradcheck_archs()) {
    const auto r = gradcheck_arch(a, 12345);
    worst = std::max(worst, r.max_rel_err);
    detail += std::string(arch_name(a)) + "=" + fmt(r.max_rel_err) + " ";
  }
  const double el = seconds_since(t0);
  report(1, worst < 1e-4 && el < 60.0,
         "gradient check, all architectures: max rel err " + fmt(worst) +
             " < 1e-4 in " + fmt(el) + "s (" + detail + ")");
}

// ---------------------------------------------------------------------------
// 2. metric implementations against brute-force oracles

MetricValue oracle_auroc(const ScoredSet& s) {
  std::size_t pos = 0, neg = 0;
  double wins = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i]) ++pos;
    else ++neg;
  }
  if (pos == 0 || neg == 0) return {};
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.labels[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j]) continue;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      else if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return {wins / (double(pos) * double(neg))};
}

MetricValue oracle_auprc(const ScoredSet& s) {
  std::size_t pos = 0;
  for (int y : s.labels) pos += y;
  if (pos == 0 || pos == s.size()) return {};
  std::vector<double> thresholds(s.scores);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  double ap = 0.0;
  std::size_t tp_prev = 0;
  for (double th : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.scores[i] >= th) (s.labels[i] ? tp : fp) += 1;
    }
    ap += double(tp - tp_prev) / double(pos) * double(tp) / double(tp + fp);
    tp_prev = tp;
  }
  return {ap};
}

void criterion2() {
  Rng rng(777);
  double worst = 0.0;
  bool defined_ok = true;
  for (int it = 0; it < 200; ++it) {
    Rng r = rng.substream(std::uint64_t(it));
    const std::size_t n = 2 + r.below(49);  // <= 50
    ScoredSet s;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse quantization forces tied scores
      s.add(double(r.below(8)) / 8.0, int(r.uniform() < 0.35));
    }
    const auto lib_roc = auroc(s), lib_ap = auprc(s);
    const auto ora_roc = oracle_auroc(s), ora_ap = oracle_auprc(s);
    if (lib_roc.defined() != ora_roc.defined() ||
        lib_ap.defined() != ora_ap.defined()) {
      defined_ok = false;
      continue;
    }
    if (lib_roc.defined())
      worst = std::max(worst, std::abs(lib_roc.get() - ora_roc.get()));
    if (lib_ap.defined())
      worst = std::max(worst, std::abs(lib_ap.get() - ora_ap.get()));
  }
  report(2, defined_ok && worst < 1e-12,
         "AUROC/AUPRC match brute-force oracles on 200 tied instances, max "
         "abs diff " +
             fmt(worst * 1e12) + "e-12");
}

// ---------------------------------------------------------------------------
// 3. uninformed baseline on a fixed-prevalence pool

void criterion3() {
  const double prevalence = 0.073;
  ModelDims dims;
  dims.static_dim = 4;
  dims.dynamic_dim = 6;
  RandomNet net(dims, 99);
  Rng label_rng = Rng(555).substream("labels");
  std::vector<PredictionRow> rows;
  for (int pi = 0; pi < 100; ++pi) {
    EncodedPatient p;
    {
      char buf[16];
      std::snprintf(buf, sizeof buf, "p%04d", pi);
      p.id = buf;
    }
    p.stat.assign(dims.static_dim, 0.0);
    p.visits.assign(17, Vector(dims.dynamic_dim, 0.0));
    p.targets.resize(17);
    p.evaluable.assign(17, 1);
    for (auto& row : p.targets)
      for (int k = 0; k < kNumLabels; ++k)
        row[k] = label_rng.uniform() < prevalence;
    std::unique_ptr<Trace> tr;
    const auto probs = net.forward(p, tr, nullptr);
    for (std::size_t t = 0; t < p.visits.size(); ++t) {
      PredictionRow r;
      r.patient_id = p.id;
      r.visit = t;
      for (int k = 0; k < kNumLabels; ++k) {
        r.prob[k] = probs[t * kNumLabels + k];
        r.truth[k] = p.targets[t][k];
      }
      rows.push_back(r);
    }
  }
  const auto pool = pool_predictions(rows);
  const auto pair = evaluate_pooled(rows);
  const bool ok = pool.size() >= 10000 && pair.roc.defined() &&
                  pair.ap.defined() && pair.roc.get() >= 0.47 &&
                  pair.roc.get() <= 0.53 && pair.ap.get() >= 0.06 &&
                  pair.ap.get() <= 0.09;
  report(3, ok,
         "random baseline on " + std::to_string(pool.size()) +
             "-entry pool: AUROC " + fmt(pair.roc.get()) +
             " in [0.47,0.53], AUPRC " + fmt(pair.ap.get()) + " in [0.06,0.09]");
}

// ---------------------------------------------------------------------------
// 4. default generator calibration

void criterion4() {
  GenConfig cfg;  // defaults, 2000 patients
  const Cohort c = generate_cohort(cfg, 42);
  const CohortSummary s = summarize(c);
  const bool ok = c.patients.size() == 2000 &&
                  std::abs(s.target_density - 0.07) <= 0.01 &&
                  std::abs(s.endpoint_patient_frac - 0.38) <= 0.04;
  report(4, ok,
         "default cohort at 2000 patients: target density " +
             fmt(s.target_density) + " = 0.07 +- 0.01, endpoint patient "
             "fraction " +
             fmt(s.endpoint_patient_frac) + " = 0.38 +- 0.04");
}

// ---------------------------------------------------------------------------
// 5. overfit a tiny cohort

void criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  GenConfig gc;
  gc.patients = 10;
  gc.visits_min = gc.visits_max = 8;
  gc.day_gap_min = gc.day_gap_max = 120;
  gc.hazard_rejection = 0.05;
  gc.hazard_loss = 0.01;
  gc.hazard_death = 0.0;  // keep all schedules at 8 visits
  const Cohort cohort = generate_cohort(gc, 7);
  std::vector<const PatientRecord*> all;
  for (const auto& p : cohort.patients) all.push_back(&p);
  const EncodedCohort enc = encode_cohort(cohort, all);
  std::vector<const EncodedPatient*> train;
  for (const auto& p : enc.patients) train.push_back(&p);

  TrainConfig tc;
  tc.rank = 16;
  tc.hidden = 32;
  tc.learning_rate = 0.1;
  tc.dropout_rate = 0.0;
  tc.max_epochs = 500;
  tc.batch = 10;
  tc.seed = 7;
  ModelDims dims;
  dims.static_dim = enc.static_dim;
  dims.dynamic_dim = enc.dynamic_dim;
  dims.rank = tc.rank;
  dims.hidden = tc.hidden;
  Rng init_rng = Rng(tc.seed).substream("init");
  auto net = make_net(Arch::Gru, dims, init_rng);
  auto opt_state = net->clone_zeroed();
  Rng root(tc.seed);

  double per_term = 1e9;
  std::size_t epochs = 0;
  for (; epochs < tc.max_epochs; ++epochs) {
    Rng epoch_rng = root.substream(epochs);
    train_epoch(*net, train, tc, *opt_state, epoch_rng);
    per_term = cohort_bce(*net, train).per_term();
    if (per_term < 0.05) break;
  }
  const double el = seconds_since(t0);
  report(5, per_term < 0.05 && el < 120.0,
         "overfit 10 patients x 8 visits: mean per-term BCE " + fmt(per_term) +
             " < 0.05 after " + std::to_string(epochs + 1) + " epochs in " +
             fmt(el) + "s");
}

// ---------------------------------------------------------------------------
// shared training configuration for the cohort-level comparisons

TrainConfig comparison_config(std::uint64_t seed) {
  TrainConfig tc;
  tc.rank = 32;
  tc.hidden = 64;
  tc.learning_rate = 0.1;
  tc.dropout_rate = 0.1;
  tc.max_epochs = 20;
  tc.patience = 5;
  tc.batch = 32;
  tc.seed = seed;
  return tc;
}

std::vector<std::uint64_t> five_seeds(std::uint64_t base) {
  return {base, base + 1, base + 2, base + 3, base + 4};
}

// ---------------------------------------------------------------------------
// 6. long-range order-sensitive motif: recurrent model beats the windowed
// feedforward baseline

void criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  GenConfig gc;
  gc.patients = 1500;
  gc.scenario = Scenario::LongMemory;
  gc.motif_fraction = 0.95;
  gc.motif_gap_min = 10;
  gc.motif_gap_max = 11;
  gc.emit_post_rejection_visits = false;
  gc.visits_min = 32;
  gc.visits_max = 36;
  gc.day_gap_max = 40;
  gc.hazard_rejection = 0.002;
  gc.hazard_loss = 0.012;
  gc.hazard_death = 0.004;
  const Cohort cohort = generate_cohort(gc, 61);
  const auto res =
      run_benchmark(cohort, {Arch::Gru, Arch::Tle}, comparison_config(61),
                    five_seeds(61));
  std::vector<double> gru, margin;
  for (int s = 0; s < 5; ++s) {
    const double g = res.rows[0].split_reports[s].pooled.roc.get();
    const double t = res.rows[1].split_reports[s].pooled.roc.get();
    gru.push_back(g);
    margin.push_back(g - t);
  }
  const double mg = median5(gru), mm = median5(margin);
  const double el = seconds_since(t0);
  report(6, mg >= 0.80 && mm >= 0.10 && el < 1800.0,
         "long-memory motif (gap >= 10 visits): median GRU pooled AUROC " +
             fmt(mg) + " >= 0.80, median margin over 3-visit window baseline " +
             fmt(mm) + " >= 0.10 in " + fmt(el) + "s");
}

// ---------------------------------------------------------------------------
// 7. recency regime: the windowed baseline keeps up with the recurrent model

void criterion7() {
  GenConfig gc;
  gc.patients = 1500;
  gc.scenario = Scenario::Recency;
  gc.recency_trigger_prob = 0.25;
  gc.recency_hit_prob = 0.6;
  gc.day_gap_min = gc.day_gap_max = 60;
  gc.visits_min = gc.visits_max = 8;
  gc.hazard_rejection = 0.0;
  gc.hazard_loss = 0.0;
  gc.hazard_death = 0.0;
  const Cohort cohort = generate_cohort(gc, 71);
  const auto res =
      run_benchmark(cohort, {Arch::Gru, Arch::Tle}, comparison_config(71),
                    five_seeds(71));
  std::vector<double> gru, tle;
  for (int s = 0; s < 5; ++s) {
    gru.push_back(res.rows[0].split_reports[s].pooled.ap.get());
    tle.push_back(res.rows[1].split_reports[s].pooled.ap.get());
  }
  const double mg = median5(gru), mt = median5(tle);
  report(7, mt >= mg - 0.02,
         "recency regime: median windowed-baseline pooled AUPRC " + fmt(mt) +
             " >= median GRU pooled AUPRC " + fmt(mg) + " - 0.02");
}

// ---------------------------------------------------------------------------
// 8. three-bucket discretization vs mean-imputation on extreme-lab risk

void criterion8() {
  GenConfig gc;
  gc.patients = 1000;
  gc.scenario = Scenario::LabExtremes;
  gc.lab_missing_rate = 0.2;
  gc.extreme_z_threshold = 2.0;
  gc.extreme_hit_prob = 0.6;
  gc.extreme_missing_rate = 1.0;
  gc.day_gap_min = gc.day_gap_max = 90;
  gc.hazard_rejection = 0.0;
  const Cohort cohort = generate_cohort(gc, 81);
  const TrainConfig tc = comparison_config(81);
  const auto seeds = five_seeds(81);
  const auto normal = run_benchmark(cohort, {Arch::Gru}, tc, seeds, false);
  const auto degraded = run_benchmark(cohort, {Arch::Gru}, tc, seeds, true);
  std::vector<double> margin;
  for (int s = 0; s < 5; ++s) {
    margin.push_back(normal.rows[0].split_reports[s].pooled.roc.get() -
                     degraded.rows[0].split_reports[s].pooled.roc.get());
  }
  const double mm = median5(margin);
  report(8, mm >= 0.02,
         "lab extremes with 20% missingness: three-bucket pipeline beats "
         "mean-imputation pipeline by median pooled AUROC margin " +
             fmt(mm) + " >= 0.02");
}

// ---------------------------------------------------------------------------
// 9. bitwise determinism of training and reporting

void criterion9() {
  GenConfig gc;
  gc.patients = 150;
  const Cohort cohort = generate_cohort(gc, 5);
  TrainConfig tc = comparison_config(5);
  tc.rank = 8;
  tc.hidden = 12;
  tc.max_epochs = 3;
  tc.patience = 1;

  const fs::path dir = fs::temp_directory_path() / "sdrnn_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> ckpt(2);
  std::vector<std::string> table(2);
  for (int run = 0; run < 2; ++run) {
    const SplitData split = make_split(cohort, 5);
    const FitResult fitres = train_on_split(Arch::Gru, split, tc, 5);
    const Checkpoint ck = checkpoint_from_net(*fitres.net, tc);
    const fs::path p = dir / ("det" + std::to_string(run) + ".bin");
    save_checkpoint(ck, p.string());
    ckpt[run] = slurp(p);
    const auto res = run_benchmark(cohort, {Arch::Gru, Arch::Random}, tc,
                                   {5, 6});
    table[run] = render_benchmark_table(res);
  }
  report(9, !ckpt[0].empty() && ckpt[0] == ckpt[1] && !table[0].empty() &&
                table[0] == table[1],
         "identical inputs, config and seed give byte-identical checkpoints "
         "and reports across two runs");
}

// ---------------------------------------------------------------------------
// 10. benchmark protocol shape: all models, shared splits, mean +- SE cells

void criterion10() {
  GenConfig gc;
  gc.patients = 300;
  const Cohort cohort = generate_cohort(gc, 10);
  TrainConfig tc = comparison_config(10);
  tc.rank = 8;
  tc.hidden = 12;
  tc.max_epochs = 2;
  tc.patience = 1;
  const std::vector<Arch> models = {Arch::Gru, Arch::Lstm, Arch::Rnn,
                                    Arch::Tle, Arch::LogReg, Arch::Random};
  const auto seeds = five_seeds(10);
  const auto res = run_benchmark(cohort, models, tc, seeds);

  bool ok = res.rows.size() == models.size() &&
            res.split_digests.size() == 5;
  for (std::size_t i = 0; ok && i < models.size(); ++i) {
    const auto& row = res.rows[i];
    ok = row.arch == models[i] && row.split_reports.size() == 5 &&
         row.agg.pooled_ap.n_used + row.agg.pooled_ap.n_undefined == 5 &&
         row.agg.pooled_roc.n_used + row.agg.pooled_roc.n_undefined == 5;
  }
  // the shared-split contract: each seed's split digest is reproducible
  for (int s = 0; ok && s < 5; ++s) {
    ok = make_split(cohort, seeds[s]).digest == res.split_digests[s];
  }
  const std::string tbl = render_benchmark_table(res);
  std::size_t lines = 0;
  for (char c : tbl) lines += c == '\n';
  ok = ok && lines == models.size() + 1 &&
       tbl.find("+-") != std::string::npos;
  for (const char* name : {"gru", "lstm", "rnn", "tle", "logreg", "random"}) {
    ok = ok && tbl.find(name) != std::string::npos;
  }
  report(10, ok,
         "benchmark protocol: one row per model over exactly 5 shared "
         "60/20/20 splits with mean +- SE cells and matching split digests");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int n) { return wanted.empty() || wanted.count(n); };

  if (want(1)) criterion1();
  if (want(2)) criterion2();
  if (want(3)) criterion3();
  if (want(4)) criterion4();
  if (want(5)) criterion5();
  if (want(6)) criterion6();
  if (want(7)) criterion7();
  if (want(8)) criterion8();
  if (want(9)) criterion9();
  if (want(10)) criterion10();

  if (g_failures) {
    std::printf("FAILED: %d criterion(s)\n", g_failures);
    return 1;
  }
  std::printf("PASSED: all criteria\n");
  return 0;
}
