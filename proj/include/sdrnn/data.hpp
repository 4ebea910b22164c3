#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdrnn/cohort.hpp"
#include "sdrnn/config.hpp"
#include "sdrnn/numerics.hpp"

namespace sdrnn {

enum class EndpointKind { Rejection, Loss, Death };
const char* endpoint_kind_name(EndpointKind k);
std::optional<EndpointKind> parse_endpoint_kind(const std::string& s);

struct EndpointEvent {
  EndpointKind kind;
  int day;
};

struct Visit {
  int day = 0;  // offset from first visit
  std::vector<std::string> meds;
  std::map<std::string, double> labs;
};

struct StaticValue {
  bool numeric = false;
  double num = 0.0;
  std::string cat;
  static StaticValue number(double v) { return {true, v, {}}; }
  static StaticValue category(std::string c) { return {false, 0.0, std::move(c)}; }
};

struct PatientRecord {
  std::string patient_id;
  std::map<std::string, StaticValue> static_features;
  std::vector<Visit> visits;
  std::vector<EndpointEvent> endpoint_events;

  int last_observed_day() const;
};

struct StaticFeatureSpec {
  std::string name;
  bool numeric = false;
  std::vector<std::string> levels;  // categorical only
};

struct Vocabulary {
  std::vector<std::string> meds;
  std::vector<std::string> labs;
  std::vector<StaticFeatureSpec> statics;

  std::size_t dynamic_width() const { return meds.size() + 3 * labs.size(); }
  std::size_t degraded_dynamic_width() const {
    return meds.size() + labs.size();
  }
  std::size_t static_width() const;
};

// -------------------------------------------------------------------------
// Synthetic cohort generation

enum class Scenario { Baseline, LongMemory, Recency, LabExtremes };
const char* scenario_name(Scenario s);

struct GenConfig {
  std::size_t patients = 2000;
  std::size_t visits_min = 14;
  std::size_t visits_max = 32;
  int day_gap_min = 15;
  int day_gap_max = 45;
  std::size_t n_meds = 25;
  std::size_t n_labs = 8;
  std::size_t meds_per_visit = 3;
  double lab_missing_rate = 0.3;
  // per-interval event probabilities before the static risk multiplier
  double hazard_rejection = 0.0065;
  double hazard_loss = 0.002;
  double hazard_death = 0.003;
  double risk_multiplier_high = 2.5;
  double risk_multiplier_low = 0.4;
  bool emit_post_rejection_visits = true;

  Scenario scenario = Scenario::Baseline;
  // long-memory motif: two marker meds placed early in a fixed or swapped
  // order, a cue lab spike >= gap visits later; only the forward order is
  // followed by an endpoint.
  double motif_fraction = 0.6;
  std::size_t motif_gap_min = 10;
  std::size_t motif_gap_max = 14;
  double motif_hit_prob = 1.0;
  // recency: a per-visit lab spike that raises short-term hazard
  double recency_trigger_prob = 0.15;
  double recency_hit_prob = 0.5;
  // lab extremes: risk driven by tail draws of the first two labs, recorded
  // or not; those labs are otherwise always reported at their reference
  // value, and tail draws are missing at their own rate
  double extreme_hit_prob = 0.35;
  double extreme_z_threshold = 1.0;
  double extreme_missing_rate = 0.5;

  static GenConfig from_kv(KVConfig& kv);
};

struct Cohort {
  std::vector<PatientRecord> patients;
  Vocabulary vocab;
};

// Deterministic given (cfg, seed); per-patient substreams keyed by index.
// Throws on infeasible configs (e.g. motif gap that cannot fit).
Cohort generate_cohort(const GenConfig& cfg, std::uint64_t seed);

// -------------------------------------------------------------------------
// Preprocessing

struct LabStat {
  double mean = 0.0;
  double std = 0.0;      // population std
  bool degenerate = false;  // unobserved in training, or single value
};

struct CohortStats {
  std::map<std::string, LabStat> labs;
  std::map<std::string, LabStat> static_numeric;
};

// Fitted on the training split only.
CohortStats fit_lab_stats(const std::vector<const PatientRecord*>& training,
                          const Vocabulary& vocab);

// High / Normal / Low triple per lab; boundary values (exactly mean +- std)
// are Normal; unmeasured labs yield (0,0,0); degenerate labs are Normal when
// measured.
void discretize_labs(const std::map<std::string, double>& visit_labs,
                     const Vocabulary& vocab, const CohortStats& stats,
                     double* out /* 3L slice */);

enum class UnknownTokenPolicy { Reject, IgnoreAndLog };

Vector encode_visit(const Visit& visit, const Vocabulary& vocab,
                    const CohortStats& stats,
                    UnknownTokenPolicy policy = UnknownTokenPolicy::Reject);

// Degraded comparison pipeline: meds plus mean-imputed standardized raw lab
// values (missing -> training mean -> 0 after standardization).
Vector encode_visit_degraded(const Visit& visit, const Vocabulary& vocab,
                             const CohortStats& stats,
                             UnknownTokenPolicy policy = UnknownTokenPolicy::Reject);

Vector encode_static(const std::map<std::string, StaticValue>& features,
                     const Vocabulary& vocab, const CohortStats& stats);

struct TargetRows {
  std::vector<std::array<std::uint8_t, kNumLabels>> bits;
  std::vector<std::uint8_t> evaluable;
};

// bit(kind, horizon) = 1 iff an endpoint of that kind occurs in
// (visit_day, visit_day + horizon]; visits whose 12-month window passes the
// last observed day with no endpoint in it are censored.
TargetRows build_targets(const PatientRecord& p);

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

// Patient-granularity 60/20/20 split (floor sizes, remainder to train),
// deterministic given the rng.
SplitIndices split_patients(std::size_t n_patients, Rng rng,
                            double frac_train = 0.6, double frac_val = 0.2,
                            double frac_test = 0.2);

// Digest of a split for cross-model protocol checks.
std::uint64_t split_digest(const Cohort& cohort, const SplitIndices& s);

EncodedCohort encode_cohort(const Cohort& cohort,
                            const std::vector<const PatientRecord*>& stats_from,
                            bool degraded = false);

// convenience: pointers into cohort.patients for a set of indices
std::vector<const PatientRecord*> select(const Cohort& c,
                                         const std::vector<std::size_t>& idx);

// -------------------------------------------------------------------------
// File formats

void save_cohort(const Cohort& c, const std::string& cohort_path,
                 const std::string& vocab_path);
Cohort load_cohort(const std::string& cohort_path,
                   const std::string& vocab_path);

struct CohortSummary {
  std::size_t patients = 0;
  std::size_t visits = 0;
  std::size_t evaluable_visits = 0;
  double target_density = 0.0;      // positives / (6 * evaluable visits)
  double endpoint_patient_frac = 0.0;  // >=1 endpoint event
};

CohortSummary summarize(const Cohort& c);

}  // namespace sdrnn
