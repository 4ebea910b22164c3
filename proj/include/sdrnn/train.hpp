#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdrnn/cohort.hpp"
#include "sdrnn/config.hpp"
#include "sdrnn/metrics.hpp"
#include "sdrnn/model.hpp"

namespace sdrnn {

enum class Optimizer { Adagrad, RmsProp };
const char* optimizer_name(Optimizer o);

struct TrainConfig {
  std::size_t rank = 50;
  std::size_t hidden = 100;
  double learning_rate = 0.1;
  double dropout_rate = 0.1;
  Optimizer optimizer = Optimizer::Adagrad;
  double rmsprop_decay = 0.9;
  double epsilon = 1e-8;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t batch = 32;  // patients per mini-batch
  std::uint64_t seed = 1;
  std::size_t tle_n = 3;

  static TrainConfig from_kv(KVConfig& kv);
  // lexicographic order used for deterministic grid tie-breaks
  bool operator<(const TrainConfig& o) const;
  std::string describe() const;
};

// Summed BCE over all evaluable (visit x label) terms of one patient, with
// probabilities already clamped by the model.
double bce_loss(const std::vector<double>& probs, const EncodedPatient& p);

// dL/d(pre-sigmoid) = yhat - y per term; censored visits contribute zero.
std::vector<double> bce_grad(const std::vector<double>& probs,
                             const EncodedPatient& p);

std::size_t evaluable_terms(const EncodedPatient& p);

// Inverted dropout on a plain vector (the models keep their own masks; this
// standalone form backs tests and any external use).
Vector dropout_apply(const Vector& v, double rate, Rng& rng, bool training);

void adagrad_update(std::span<double> theta, std::span<const double> grad,
                    std::span<double> state, double lr, double eps);
void rmsprop_update(std::span<double> theta, std::span<const double> grad,
                    std::span<double> state, double lr, double rho, double eps);

// Evaluation-mode loss over a set of patients (no dropout): (sum, #terms).
struct LossStat {
  double sum = 0.0;
  std::size_t terms = 0;
  double per_term() const { return terms ? sum / double(terms) : 0.0; }
};
LossStat cohort_bce(const Net& net, const std::vector<const EncodedPatient*>& ps);

std::vector<PredictionRow> predict_cohort(
    const Net& net, const std::vector<const EncodedPatient*>& ps);

// One pass over the training patients in shuffled mini-batches with full
// backpropagation through each patient's sequence. Returns the summed
// training loss (dropout active). lr = 0 leaves parameters untouched.
double train_epoch(Net& net, const std::vector<const EncodedPatient*>& train,
                   const TrainConfig& cfg, Net& opt_state, Rng& rng);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_auprc;  // NaN when undefined
  std::size_t best_epoch = 0;
  double best_val_auprc = 0.0;
};

struct FitResult {
  std::unique_ptr<Net> net;  // parameters of the best validation epoch
  TrainHistory history;
};

// Trains with early stopping on validation pooled AUPRC; stops once
// (epoch - best_epoch) > patience.
FitResult fit(std::unique_ptr<Net> net,
              const std::vector<const EncodedPatient*>& train,
              const std::vector<const EncodedPatient*>& validation,
              const TrainConfig& cfg);

struct GridPoint {
  TrainConfig cfg;
  double val_auprc = 0.0;
};

struct GridResult {
  TrainConfig best;
  std::vector<GridPoint> points;
};

// Fits every grid point and keeps the max validation pooled AUPRC;
// deterministic tie-break by lexicographic config order.
GridResult grid_search(Arch arch, const ModelDims& base_dims,
                       const std::vector<const EncodedPatient*>& train,
                       const std::vector<const EncodedPatient*>& validation,
                       const std::vector<TrainConfig>& grid);

// The default grid contains the reference configuration
// {rank 50, hidden 100, lr 0.1, dropout 0.1, adagrad}.
std::vector<TrainConfig> default_grid();

}  // namespace sdrnn
