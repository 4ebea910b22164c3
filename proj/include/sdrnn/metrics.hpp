#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdrnn/cohort.hpp"

namespace sdrnn {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 0/1

  void add(double s, int y) {
    scores.push_back(s);
    labels.push_back(y);
  }
  std::size_t positives() const;
  std::size_t size() const { return scores.size(); }
};

// Degenerate inputs (no positives / no negatives) yield an explicitly
// undefined value, never a silent 0.
struct MetricValue {
  std::optional<double> value;
  bool defined() const { return value.has_value(); }
  double get() const { return *value; }
};

// Mann-Whitney statistic over all positive-negative pairs, ties count 1/2.
MetricValue auroc(const ScoredSet& s);

// Average precision with tied scores collapsed into one threshold group;
// step-wise sum, no trapezoidal interpolation.
MetricValue auprc(const ScoredSet& s);

struct MetricPair {
  MetricValue ap;   // AUPRC
  MetricValue roc;  // AUROC
};

// One prediction row per (patient, visit) with the 6 probabilities, the
// truth bits and the censoring flag.
struct PredictionRow {
  std::string patient_id;
  std::size_t visit = 0;
  std::array<double, kNumLabels> prob{};
  std::array<std::uint8_t, kNumLabels> truth{};
  bool evaluable = true;
};

ScoredSet pool_predictions(const std::vector<PredictionRow>& rows);
ScoredSet column_predictions(const std::vector<PredictionRow>& rows, int label);

MetricPair evaluate_pooled(const std::vector<PredictionRow>& rows);
std::array<MetricPair, kNumLabels> evaluate_per_endpoint(
    const std::vector<PredictionRow>& rows);

// Full single-split report: pooled row plus the six endpoint rows.
struct EvalReport {
  MetricPair pooled;
  std::array<MetricPair, kNumLabels> per_endpoint;
};

EvalReport evaluate(const std::vector<PredictionRow>& rows);

// mean +- standard error over repeated splits; SE = sample std / sqrt(k).
// Undefined per-split values are excluded and counted.
struct AggregateCell {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n_used = 0;
  std::size_t n_undefined = 0;
  std::vector<double> values;
};

AggregateCell aggregate_values(const std::vector<MetricValue>& vals);

struct AggregateReport {
  AggregateCell pooled_ap, pooled_roc;
  std::array<AggregateCell, kNumLabels> ap;
  std::array<AggregateCell, kNumLabels> roc;
};

AggregateReport aggregate_splits(const std::vector<EvalReport>& reports);

// "0.345 +- 0.013" style cell; "undefined" when no split produced a value.
std::string format_cell(const AggregateCell& c);

}  // namespace sdrnn
