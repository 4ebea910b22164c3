#include "sdrnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sdrnn {

std::size_t ScoredSet::positives() const {
  std::size_t n = 0;
  for (int y : labels) n += (y != 0);
  return n;
}

MetricValue auroc(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) {
    throw std::invalid_argument("auroc: scores/labels length mismatch");
  }
  const std::size_t np = s.positives();
  const std::size_t nn = s.size() - np;
  if (np == 0 || nn == 0) return {};

  // rank-sum with midranks for ties
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.scores[a] < s.scores[b];
  });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && s.scores[idx[j]] == s.scores[idx[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // 1-based midrank
    for (std::size_t q = i; q < j; ++q) {
      if (s.labels[idx[q]]) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double u = pos_rank_sum - double(np) * double(np + 1) / 2.0;
  return {u / (double(np) * double(nn))};
}

MetricValue auprc(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) {
    throw std::invalid_argument("auprc: scores/labels length mismatch");
  }
  const std::size_t np = s.positives();
  if (np == 0) return {};

  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.scores[a] > s.scores[b];
  });

  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    std::size_t g_tp = 0, g_fp = 0;
    while (j < idx.size() && s.scores[idx[j]] == s.scores[idx[i]]) {
      if (s.labels[idx[j]]) ++g_tp; else ++g_fp;
      ++j;
    }
    tp += g_tp;
    fp += g_fp;
    const double recall = double(tp) / double(np);
    const double precision = double(tp) / double(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return {ap};
}

ScoredSet pool_predictions(const std::vector<PredictionRow>& rows) {
  ScoredSet s;
  for (const auto& r : rows) {
    if (!r.evaluable) continue;
    for (int k = 0; k < kNumLabels; ++k) s.add(r.prob[k], r.truth[k]);
  }
  return s;
}

ScoredSet column_predictions(const std::vector<PredictionRow>& rows,
                             int label) {
  ScoredSet s;
  for (const auto& r : rows) {
    if (!r.evaluable) continue;
    s.add(r.prob[label], r.truth[label]);
  }
  return s;
}

MetricPair evaluate_pooled(const std::vector<PredictionRow>& rows) {
  ScoredSet s = pool_predictions(rows);
  return {auprc(s), auroc(s)};
}

std::array<MetricPair, kNumLabels> evaluate_per_endpoint(
    const std::vector<PredictionRow>& rows) {
  std::array<MetricPair, kNumLabels> out;
  for (int k = 0; k < kNumLabels; ++k) {
    ScoredSet s = column_predictions(rows, k);
    out[k] = {auprc(s), auroc(s)};
  }
  return out;
}

EvalReport evaluate(const std::vector<PredictionRow>& rows) {
  return {evaluate_pooled(rows), evaluate_per_endpoint(rows)};
}

AggregateCell aggregate_values(const std::vector<MetricValue>& vals) {
  AggregateCell c;
  for (const auto& v : vals) {
    if (v.defined()) c.values.push_back(v.get());
    else ++c.n_undefined;
  }
  c.n_used = c.values.size();
  if (c.n_used == 0) return c;
  c.mean = std::accumulate(c.values.begin(), c.values.end(), 0.0) /
           double(c.n_used);
  if (c.n_used > 1) {
    double ss = 0.0;
    for (double v : c.values) ss += (v - c.mean) * (v - c.mean);
    const double sample_std = std::sqrt(ss / double(c.n_used - 1));
    c.se = sample_std / std::sqrt(double(c.n_used));
  }
  return c;
}

AggregateReport aggregate_splits(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) {
    throw std::invalid_argument("aggregate_splits: need at least 2 reports");
  }
  AggregateReport agg;
  std::vector<MetricValue> v;
  auto collect = [&](auto pick) {
    v.clear();
    for (const auto& r : reports) v.push_back(pick(r));
    return aggregate_values(v);
  };
  agg.pooled_ap = collect([](const EvalReport& r) { return r.pooled.ap; });
  agg.pooled_roc = collect([](const EvalReport& r) { return r.pooled.roc; });
  for (int k = 0; k < kNumLabels; ++k) {
    agg.ap[k] =
        collect([k](const EvalReport& r) { return r.per_endpoint[k].ap; });
    agg.roc[k] =
        collect([k](const EvalReport& r) { return r.per_endpoint[k].roc; });
  }
  return agg;
}

std::string format_cell(const AggregateCell& c) {
  if (c.n_used == 0) return "undefined";
  std::ostringstream os;
  os.precision(3);
  os << std::fixed << c.mean << " +- " << c.se;
  if (c.n_undefined > 0) os << " (" << c.n_undefined << " undefined)";
  return os.str();
}

}  // namespace sdrnn
