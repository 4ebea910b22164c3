#include "sdrnn/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sdrnn {

std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b) {
  return Rng(a).substream(b).next_u64();
}

SplitData make_split(const Cohort& cohort, std::uint64_t split_seed,
                     bool degraded) {
  SplitData s;
  s.idx = split_patients(cohort.patients.size(),
                         Rng(split_seed).substream("split"));
  s.digest = split_digest(cohort, s.idx);
  s.enc = encode_cohort(cohort, select(cohort, s.idx.train), degraded);
  for (auto i : s.idx.train) s.train.push_back(&s.enc.patients[i]);
  for (auto i : s.idx.validation) s.validation.push_back(&s.enc.patients[i]);
  for (auto i : s.idx.test) s.test.push_back(&s.enc.patients[i]);
  return s;
}

ModelDims dims_for(const SplitData& split, const TrainConfig& cfg) {
  ModelDims d;
  d.static_dim = split.enc.static_dim;
  d.dynamic_dim = split.enc.dynamic_dim;
  d.labels = kNumLabels;
  d.rank = cfg.rank;
  d.hidden = cfg.hidden;
  d.tle_n = cfg.tle_n;
  return d;
}

FitResult train_on_split(Arch arch, const SplitData& split, TrainConfig cfg,
                         std::uint64_t split_seed) {
  cfg.seed = mix_seeds(cfg.seed, split_seed);
  Rng init_rng = Rng(cfg.seed).substream("init");
  auto net = make_net(arch, dims_for(split, cfg), init_rng, cfg.seed);
  return fit(std::move(net), split.train, split.validation, cfg);
}

EvalReport eval_on_test(const Net& net, const SplitData& split) {
  return evaluate(predict_cohort(net, split.test));
}

BenchmarkResult run_benchmark(const Cohort& cohort,
                              const std::vector<Arch>& models,
                              const TrainConfig& cfg,
                              const std::vector<std::uint64_t>& split_seeds,
                              bool degraded) {
  if (models.size() < 1) {
    throw std::invalid_argument("run_benchmark: no models given");
  }
  BenchmarkResult res;
  res.rows.resize(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) res.rows[m].arch = models[m];

  for (std::uint64_t seed : split_seeds) {
    std::uint64_t first_digest = 0;
    for (std::size_t m = 0; m < models.size(); ++m) {
      // rebuilt per model so the shared-split protocol is checked, not assumed
      SplitData split = make_split(cohort, seed, degraded);
      if (m == 0) {
        first_digest = split.digest;
        res.split_digests.push_back(split.digest);
      } else if (split.digest != first_digest) {
        throw std::runtime_error("run_benchmark: split digest mismatch for seed " +
                                 std::to_string(seed));
      }
      auto r = train_on_split(models[m], split, cfg, seed);
      res.rows[m].split_reports.push_back(eval_on_test(*r.net, split));
    }
  }
  for (auto& row : res.rows) {
    row.agg = aggregate_splits(row.split_reports);
  }
  return res;
}

std::string render_benchmark_table(const BenchmarkResult& r) {
  std::ostringstream os;
  os << "model\tAUPRC\tAUROC\n";
  for (const auto& row : r.rows) {
    os << arch_name(row.arch) << "\t" << format_cell(row.agg.pooled_ap) << "\t"
       << format_cell(row.agg.pooled_roc) << "\n";
  }
  return os.str();
}

// -------------------------------------------------------------------------
// gradcheck

std::vector<Arch> gradcheck_archs() {
  return {Arch::Rnn, Arch::Lstm, Arch::Gru,
          Arch::Tle, Arch::LogReg, Arch::StaticOnly};
}

static EncodedPatient random_patient(Rng& rng, std::size_t static_dim,
                                     std::size_t dynamic_dim, std::size_t t) {
  EncodedPatient p;
  p.id = "gc" + std::to_string(rng.below(1000));
  p.stat.resize(static_dim);
  for (auto& v : p.stat) v = rng.uniform(-1.0, 1.0);
  p.visits.resize(t);
  p.targets.resize(t);
  p.evaluable.assign(t, 1);
  for (std::size_t i = 0; i < t; ++i) {
    p.visits[i].resize(dynamic_dim);
    for (auto& v : p.visits[i]) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    for (int k = 0; k < kNumLabels; ++k) {
      p.targets[i][k] = rng.uniform() < 0.3 ? 1 : 0;
    }
  }
  return p;
}

GradCheckReport gradcheck_arch(Arch arch, std::uint64_t seed) {
  ModelDims dims;
  dims.static_dim = 5;
  dims.dynamic_dim = 9;
  dims.labels = kNumLabels;
  dims.rank = 3;
  dims.hidden = 4;
  dims.tle_n = 3;

  Rng rng = Rng(seed).substream("gradcheck");
  Rng init_rng = rng.substream("init");
  auto net = make_net(arch, dims, init_rng, seed);

  Rng data_rng = rng.substream("data");
  std::vector<EncodedPatient> patients;
  patients.push_back(random_patient(data_rng, 5, 9, 6));
  patients.push_back(random_patient(data_rng, 5, 9, 8));

  auto objective = [&]() {
    double loss = 0.0;
    for (const auto& p : patients) {
      std::unique_ptr<Trace> tr;
      loss += bce_loss(net->forward(p, tr, nullptr), p);
    }
    return loss;
  };

  auto grad = net->clone_zeroed();
  for (const auto& p : patients) {
    std::unique_ptr<Trace> tr;
    auto probs = net->forward(p, tr, nullptr);
    net->backward(p, *tr, bce_grad(probs, p), *grad);
  }

  auto res = finite_diff_check(objective, net->tensors(), grad->tensors());
  GradCheckReport rep;
  rep.arch = arch;
  rep.max_rel_err = res.max_rel_err;
  auto refs = net->tensors();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    rep.per_tensor.emplace_back(refs[i].name, res.per_tensor[i]);
  }
  return rep;
}

// -------------------------------------------------------------------------
// manifests

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::map<std::string, std::string>& config,
                    const std::vector<std::string>& input_files,
                    double wall_seconds) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  nlohmann::ordered_json jc = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) jc[k] = v;
  j["config"] = jc;
  nlohmann::ordered_json ji = nlohmann::ordered_json::object();
  for (const auto& f : input_files) ji[f] = file_digest(f);
  j["input_digests"] = ji;
  j["wall_seconds"] = wall_seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace sdrnn
