#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sdrnn/data.hpp"
#include "sdrnn/metrics.hpp"
#include "sdrnn/model.hpp"
#include "sdrnn/train.hpp"

namespace sdrnn {

inline constexpr const char* kToolVersion = "sdrnn 1.0.0";

std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b);

// One 60/20/20 patient-level split with preprocessing statistics fitted on
// the training patients only.
struct SplitData {
  SplitIndices idx;
  EncodedCohort enc;
  std::vector<const EncodedPatient*> train, validation, test;
  std::uint64_t digest = 0;
};

SplitData make_split(const Cohort& cohort, std::uint64_t split_seed,
                     bool degraded = false);

ModelDims dims_for(const SplitData& split, const TrainConfig& cfg);

// Initializes from (cfg.seed, split_seed) and fits with early stopping.
FitResult train_on_split(Arch arch, const SplitData& split, TrainConfig cfg,
                         std::uint64_t split_seed);

EvalReport eval_on_test(const Net& net, const SplitData& split);

// The five-split protocol: for each split seed, every model trains on the
// identical split (asserted by digest) and test reports are aggregated.
struct BenchmarkRow {
  Arch arch;
  std::vector<EvalReport> split_reports;
  AggregateReport agg;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<std::uint64_t> split_digests;
};

BenchmarkResult run_benchmark(const Cohort& cohort,
                              const std::vector<Arch>& models,
                              const TrainConfig& cfg,
                              const std::vector<std::uint64_t>& split_seeds,
                              bool degraded = false);

std::string render_benchmark_table(const BenchmarkResult& r);

// Finite-difference verification of a full architecture at small dims
// (static 5, dynamic 9, rank 3, hidden 4, T <= 8), objective = summed BCE
// over two synthetic patients.
struct GradCheckReport {
  Arch arch;
  std::vector<std::pair<std::string, double>> per_tensor;
  double max_rel_err = 0.0;
};

GradCheckReport gradcheck_arch(Arch arch, std::uint64_t seed);

// All architectures with parameters.
std::vector<Arch> gradcheck_archs();

// FNV-1a over the file bytes, hex-encoded.
std::string file_digest(const std::string& path);

void write_manifest(const std::string& path, const std::string& command,
                    const std::map<std::string, std::string>& config,
                    const std::vector<std::string>& input_files,
                    double wall_seconds);

}  // namespace sdrnn
