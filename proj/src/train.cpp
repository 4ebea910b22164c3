#include "sdrnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sdrnn {

const char* optimizer_name(Optimizer o) {
  return o == Optimizer::Adagrad ? "adagrad" : "rmsprop";
}

TrainConfig TrainConfig::from_kv(KVConfig& kv) {
  TrainConfig c;
  c.rank = std::size_t(kv.get_int("rank", std::int64_t(c.rank)));
  c.hidden = std::size_t(kv.get_int("hidden", std::int64_t(c.hidden)));
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.dropout_rate = kv.get_double("dropout_rate", c.dropout_rate);
  const std::string opt = kv.get_string("optimizer", "adagrad");
  if (opt == "adagrad") c.optimizer = Optimizer::Adagrad;
  else if (opt == "rmsprop") c.optimizer = Optimizer::RmsProp;
  else throw std::invalid_argument("unknown optimizer: '" + opt + "'");
  c.rmsprop_decay = kv.get_double("rmsprop_decay", c.rmsprop_decay);
  c.epsilon = kv.get_double("epsilon", c.epsilon);
  c.max_epochs = std::size_t(kv.get_int("max_epochs", std::int64_t(c.max_epochs)));
  c.patience = std::size_t(kv.get_int("patience", std::int64_t(c.patience)));
  c.batch = std::size_t(kv.get_int("batch", std::int64_t(c.batch)));
  c.seed = kv.get_u64("seed", c.seed);
  c.tle_n = std::size_t(kv.get_int("tle_n", std::int64_t(c.tle_n)));
  if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0) {
    throw std::invalid_argument("dropout_rate must be in [0,1)");
  }
  if (c.learning_rate <= 0.0) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  return c;
}

bool TrainConfig::operator<(const TrainConfig& o) const {
  auto key = [](const TrainConfig& c) {
    return std::tuple(c.rank, c.hidden, c.learning_rate, c.dropout_rate,
                      int(c.optimizer), c.tle_n);
  };
  return key(*this) < key(o);
}

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os << "rank=" << rank << " hidden=" << hidden << " lr=" << learning_rate
     << " dropout=" << dropout_rate << " opt=" << optimizer_name(optimizer)
     << " tle_n=" << tle_n;
  return os.str();
}

double bce_loss(const std::vector<double>& probs, const EncodedPatient& p) {
  const std::size_t k = kNumLabels;
  if (probs.size() != p.visits.size() * k) {
    throw std::invalid_argument("bce_loss: prediction shape mismatch");
  }
  double loss = 0.0;
  for (std::size_t t = 0; t < p.visits.size(); ++t) {
    if (!p.evaluable[t]) continue;
    for (std::size_t j = 0; j < k; ++j) {
      const double y = p.targets[t][j];
      const double yh = probs[t * k + j];
      loss += -y * std::log(yh) - (1.0 - y) * std::log(1.0 - yh);
    }
  }
  return loss;
}

std::vector<double> bce_grad(const std::vector<double>& probs,
                             const EncodedPatient& p) {
  const std::size_t k = kNumLabels;
  if (probs.size() != p.visits.size() * k) {
    throw std::invalid_argument("bce_grad: prediction shape mismatch");
  }
  std::vector<double> dz(probs.size(), 0.0);
  for (std::size_t t = 0; t < p.visits.size(); ++t) {
    if (!p.evaluable[t]) continue;
    for (std::size_t j = 0; j < k; ++j) {
      dz[t * k + j] = probs[t * k + j] - double(p.targets[t][j]);
    }
  }
  return dz;
}

std::size_t evaluable_terms(const EncodedPatient& p) {
  std::size_t n = 0;
  for (auto e : p.evaluable) n += e;
  return n * kNumLabels;
}

Vector dropout_apply(const Vector& v, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return v;
  Vector out(v.size());
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = (rng.uniform() < rate) ? 0.0 : v[i] * scale;
  }
  return out;
}

void adagrad_update(std::span<double> theta, std::span<const double> grad,
                    std::span<double> state, double lr, double eps) {
  if (theta.size() != grad.size() || theta.size() != state.size()) {
    throw std::invalid_argument("adagrad_update: shape mismatch");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state[i] += grad[i] * grad[i];
    theta[i] -= lr * grad[i] / (std::sqrt(state[i]) + eps);
  }
}

void rmsprop_update(std::span<double> theta, std::span<const double> grad,
                    std::span<double> state, double lr, double rho,
                    double eps) {
  if (theta.size() != grad.size() || theta.size() != state.size()) {
    throw std::invalid_argument("rmsprop_update: shape mismatch");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state[i] = rho * state[i] + (1.0 - rho) * grad[i] * grad[i];
    theta[i] -= lr * grad[i] / std::sqrt(state[i] + eps);
  }
}

LossStat cohort_bce(const Net& net,
                    const std::vector<const EncodedPatient*>& ps) {
  LossStat s;
  for (const auto* p : ps) {
    std::unique_ptr<Trace> tr;
    auto probs = net.forward(*p, tr, nullptr);
    s.sum += bce_loss(probs, *p);
    s.terms += evaluable_terms(*p);
  }
  return s;
}

std::vector<PredictionRow> predict_cohort(
    const Net& net, const std::vector<const EncodedPatient*>& ps) {
  std::vector<PredictionRow> rows;
  for (const auto* p : ps) {
    std::unique_ptr<Trace> tr;
    auto probs = net.forward(*p, tr, nullptr);
    for (std::size_t t = 0; t < p->visits.size(); ++t) {
      PredictionRow r;
      r.patient_id = p->id;
      r.visit = t;
      for (int k = 0; k < kNumLabels; ++k) {
        r.prob[k] = probs[t * kNumLabels + k];
        r.truth[k] = p->targets[t][k];
      }
      r.evaluable = p->evaluable[t] != 0;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

double train_epoch(Net& net, const std::vector<const EncodedPatient*>& train,
                   const TrainConfig& cfg, Net& opt_state, Rng& rng) {
  if (train.empty()) {
    throw std::invalid_argument("train_epoch: empty training set");
  }
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng = rng.substream("shuffle");
  shuffle_rng.shuffle(order);
  Rng dropout_rng = rng.substream("dropout");

  auto grad = net.clone_zeroed();
  auto params = net.tensors();
  auto grads = grad->tensors();
  auto states = opt_state.tensors();

  double total_loss = 0.0;
  std::size_t batch_fill = 0;
  auto flush = [&]() {
    if (batch_fill == 0) return;
    if (cfg.learning_rate > 0.0) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        std::span<double> th(params[i].data, params[i].size);
        std::span<const double> g(grads[i].data, grads[i].size);
        std::span<double> st(states[i].data, states[i].size);
        if (cfg.optimizer == Optimizer::Adagrad) {
          adagrad_update(th, g, st, cfg.learning_rate, cfg.epsilon);
        } else {
          rmsprop_update(th, g, st, cfg.learning_rate, cfg.rmsprop_decay,
                         cfg.epsilon);
        }
      }
    }
    for (auto& g : grads) std::fill(g.data, g.data + g.size, 0.0);
    batch_fill = 0;
  };

  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const EncodedPatient& p = *train[order[oi]];
    DropoutCtx dctx{cfg.dropout_rate, &dropout_rng};
    const DropoutCtx* dp = cfg.dropout_rate > 0.0 ? &dctx : nullptr;
    std::unique_ptr<Trace> tr;
    auto probs = net.forward(p, tr, dp);
    total_loss += bce_loss(probs, p);
    auto dz = bce_grad(probs, p);
    net.backward(p, *tr, dz, *grad);
    if (++batch_fill >= cfg.batch) flush();
  }
  flush();
  return total_loss;
}

static MetricValue validation_auprc(
    const Net& net, const std::vector<const EncodedPatient*>& val) {
  return evaluate_pooled(predict_cohort(net, val)).ap;
}

FitResult fit(std::unique_ptr<Net> net,
              const std::vector<const EncodedPatient*>& train,
              const std::vector<const EncodedPatient*>& validation,
              const TrainConfig& cfg) {
  if (train.empty() || validation.empty()) {
    throw std::invalid_argument("fit: empty train or validation set");
  }
  FitResult res;
  if (!net->trainable()) {
    res.net = std::move(net);
    auto v = validation_auprc(*res.net, validation);
    res.history.best_val_auprc = v.defined() ? v.get() : 0.0;
    return res;
  }

  auto opt_state = net->clone_zeroed();
  Rng root(cfg.seed);
  std::unique_ptr<Net> best = net->clone();
  double best_score = -1.0;
  std::size_t best_epoch = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng epoch_rng = root.substream(epoch);
    const double loss = train_epoch(*net, train, cfg, *opt_state, epoch_rng);
    auto v = validation_auprc(*net, validation);
    const double score =
        v.defined() ? v.get() : std::numeric_limits<double>::quiet_NaN();
    res.history.train_loss.push_back(loss);
    res.history.val_auprc.push_back(score);
    if (v.defined() && score > best_score) {
      best_score = score;
      best_epoch = epoch;
      best = net->clone();
    }
    if (epoch - best_epoch > cfg.patience) break;
  }
  res.history.best_epoch = best_epoch;
  res.history.best_val_auprc = best_score;
  res.net = std::move(best);
  return res;
}

GridResult grid_search(Arch arch, const ModelDims& base_dims,
                       const std::vector<const EncodedPatient*>& train,
                       const std::vector<const EncodedPatient*>& validation,
                       const std::vector<TrainConfig>& grid) {
  if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
  GridResult res;
  for (const auto& cfg : grid) {
    ModelDims dims = base_dims;
    dims.rank = cfg.rank;
    dims.hidden = cfg.hidden;
    dims.tle_n = cfg.tle_n;
    Rng init_rng = Rng(cfg.seed).substream("init");
    auto net = make_net(arch, dims, init_rng, cfg.seed);
    auto r = fit(std::move(net), train, validation, cfg);
    res.points.push_back({cfg, r.history.best_val_auprc});
  }
  // max score; lexicographic config order breaks ties
  const GridPoint* best = &res.points.front();
  for (const auto& p : res.points) {
    if (p.val_auprc > best->val_auprc ||
        (p.val_auprc == best->val_auprc && p.cfg < best->cfg)) {
      best = &p;
    }
  }
  res.best = best->cfg;
  return res;
}

std::vector<TrainConfig> default_grid() {
  std::vector<TrainConfig> grid;
  TrainConfig ref;  // rank 50, hidden 100, lr 0.1, dropout 0.1, adagrad
  grid.push_back(ref);
  TrainConfig small = ref;
  small.rank = 25;
  small.hidden = 50;
  grid.push_back(small);
  TrainConfig rms = ref;
  rms.optimizer = Optimizer::RmsProp;
  rms.learning_rate = 0.01;
  grid.push_back(rms);
  return grid;
}

}  // namespace sdrnn
