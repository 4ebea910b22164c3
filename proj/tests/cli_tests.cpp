// Integration tests that exercise the command-line binary end to end.
// argv[1] is the path to the built CLI.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::string g_cli;
fs::path g_dir;

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "ok  " : "FAIL") << " - " << what << "\n";
  if (!ok) ++g_failures;
}

int run(const std::string& args, const std::string& log = "cmd.log") {
  const std::string cmd =
      g_cli + " " + args + " > " + (g_dir / log).string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += (c == '\n');
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_tests <path-to-cli>\n";
    return 2;
  }
  g_cli = argv[1];
  g_dir = fs::temp_directory_path() / "sdrnn_cli_tests";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);
  const std::string d = g_dir.string();

  // --- usage errors ---------------------------------------------------------
  check(run("") == 2, "no subcommand exits 2");
  check(run("frobnicate") == 2, "unknown subcommand exits 2");
  check(run("train --out x") == 2, "missing required flags exit 2");

  // --- synth ----------------------------------------------------------------
  write(g_dir / "tiny.cfg", "patients=40\n");
  check(run("synth --config " + d + "/tiny.cfg --seed 5 --out " + d + "/s1") == 0,
        "synth succeeds");
  check(run("synth --config " + d + "/tiny.cfg --seed 5 --out " + d + "/s2") == 0,
        "synth succeeds again");
  check(slurp(g_dir / "s1/cohort.jsonl") == slurp(g_dir / "s2/cohort.jsonl") &&
            !slurp(g_dir / "s1/cohort.jsonl").empty(),
        "same seed gives byte-identical cohort files");
  check(slurp(g_dir / "s1/vocab.json") == slurp(g_dir / "s2/vocab.json"),
        "same seed gives byte-identical vocab files");
  check(fs::exists(g_dir / "s1/manifest.json"), "synth writes a manifest");
  check(fs::exists(g_dir / "s1/summary.tsv"), "synth writes a density report");

  write(g_dir / "zero.cfg", "patients=0\n");
  check(run("synth --config " + d + "/zero.cfg --out " + d + "/z") == 2,
        "patients=0 exits 2");
  check(!fs::exists(g_dir / "z/cohort.jsonl"),
        "patients=0 leaves no cohort file behind");

  write(g_dir / "badkey.cfg", "patients=40\npatiens=9\n");
  check(run("synth --config " + d + "/badkey.cfg --out " + d + "/bk") == 2,
        "unknown config key exits 2");
  check(slurp(g_dir / "cmd.log").find("patiens") != std::string::npos,
        "unknown key is named in the error");

  // --- train ----------------------------------------------------------------
  write(g_dir / "train.cfg",
        "rank=6\nhidden=8\nmax_epochs=2\npatience=1\nbatch=8\n");
  const std::string data_flags =
      " --cohort " + d + "/s1/cohort.jsonl --vocab " + d + "/s1/vocab.json";
  const std::string train_flags = data_flags + " --config " + d +
                                  "/train.cfg --seed 11 --split-seed 4";

  check(run("train --arch gru" + train_flags + " --out " + d + "/t1") == 0,
        "train gru succeeds");
  check(run("train --arch gru" + train_flags + " --out " + d + "/t2") == 0,
        "train gru succeeds again");
  check(slurp(g_dir / "t1/checkpoint.bin") == slurp(g_dir / "t2/checkpoint.bin") &&
            !slurp(g_dir / "t1/checkpoint.bin").empty(),
        "identical inputs give byte-identical checkpoints");
  check(slurp(g_dir / "t1/history.tsv") == slurp(g_dir / "t2/history.tsv"),
        "identical inputs give identical history files");

  check(run("train --arch random" + train_flags + " --out " + d + "/tr") == 0,
        "arch=random emits a stub checkpoint without training");
  check(fs::exists(g_dir / "tr/checkpoint.bin"), "random checkpoint exists");

  check(run("train --arch gru --cohort /nope/cohort.jsonl --vocab " + d +
            "/s1/vocab.json --config " + d + "/train.cfg --out " + d +
            "/tm") == 4,
        "missing cohort file exits 4");

  // --- evaluate -------------------------------------------------------------
  const std::string eval_flags = data_flags + " --split-seed 4";
  check(run("evaluate --checkpoint " + d + "/t1/checkpoint.bin" + eval_flags +
            " --out " + d + "/e1") == 0,
        "evaluate succeeds");
  check(run("evaluate --checkpoint " + d + "/t1/checkpoint.bin" + eval_flags +
            " --out " + d + "/e2") == 0,
        "evaluate succeeds again");
  const std::string report = slurp(g_dir / "e1/report.tsv");
  check(report == slurp(g_dir / "e2/report.tsv"),
        "evaluate twice gives identical report bytes");
  check(count_lines(report) == 8, "report = header + pooled + 6 endpoint rows");
  check(report.find("pooled") != std::string::npos &&
            report.find("rejection_6m") != std::string::npos &&
            report.find("death_12m") != std::string::npos,
        "report names the pooled and endpoint rows");

  // dimension mismatch: evaluate against a differently sized vocabulary
  write(g_dir / "other.cfg", "patients=40\nn_meds=5\nn_labs=2\n");
  run("synth --config " + d + "/other.cfg --seed 5 --out " + d + "/s3");
  check(run("evaluate --checkpoint " + d + "/t1/checkpoint.bin --cohort " + d +
            "/s3/cohort.jsonl --vocab " + d + "/s3/vocab.json --split-seed 4" +
            " --out " + d + "/em") == 2,
        "vocabulary dimension mismatch exits 2");

  // --- predict --------------------------------------------------------------
  check(run("predict --checkpoint " + d + "/t1/checkpoint.bin" + data_flags +
            " --out " + d + "/p1") == 0,
        "predict succeeds");
  {
    const std::string preds = slurp(g_dir / "p1/predictions.tsv");
    check(!preds.empty(), "predictions file is non-empty");
    std::istringstream in(preds);
    std::string line;
    bool cols_ok = true, probs_ok = true;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      std::istringstream ls(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ls, field, '\t')) fields.push_back(field);
      if (fields.size() != 8) cols_ok = false;
      for (std::size_t i = 2; i < fields.size(); ++i) {
        const double v = std::atof(fields[i].c_str());
        if (!(v > 0.0 && v < 1.0)) probs_ok = false;
      }
    }
    check(cols_ok, "prediction rows have patient, visit and 6 probabilities");
    check(probs_ok, "predicted probabilities lie strictly inside (0,1)");
    check(rows > 40, "one prediction row per visit");
  }

  // --- gradcheck ------------------------------------------------------------
  check(run("gradcheck --seed 3", "gc.log") == 0, "gradcheck passes");
  {
    const std::string log = slurp(g_dir / "gc.log");
    for (const char* a : {"rnn", "lstm", "gru", "tle", "logreg", "static"}) {
      check(log.find(std::string(a) + "\tmax") != std::string::npos,
            std::string("gradcheck reports ") + a);
    }
  }
  check(run("gradcheck --arch gru --seed 3") == 0, "single-arch gradcheck");

  // --- benchmark ------------------------------------------------------------
  check(run("benchmark" + data_flags + " --models random,logreg --config " + d +
            "/train.cfg --seed 2 --splits 2 --out " + d + "/b1") == 0,
        "benchmark with two models succeeds");
  {
    const std::string table = slurp(g_dir / "b1/benchmark.tsv");
    check(count_lines(table) == 3, "benchmark table: header + one row per model");
    check(table.find("random") != std::string::npos &&
              table.find("logreg") != std::string::npos,
        "benchmark table names both models");
    check(table.find("+-") != std::string::npos,
          "benchmark cells are mean +- SE");
    check(count_lines(slurp(g_dir / "b1/split_digests.txt")) == 2,
          "one split digest per split seed");
  }

  std::cout << (g_failures ? "FAILED" : "PASSED") << " cli tests ("
            << g_failures << " failures)\n";
  return g_failures ? 1 : 0;
}
