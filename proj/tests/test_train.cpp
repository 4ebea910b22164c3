#include <cmath>

#include "doctest.h"
#include "sdrnn/model.hpp"
#include "sdrnn/train.hpp"

using namespace sdrnn;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.static_dim = 4;
  d.dynamic_dim = 6;
  d.rank = 3;
  d.hidden = 4;
  d.tle_n = 2;
  return d;
}

// Learnable toy population: the positive label follows the sign of the first
// static feature, with a little noise.
std::vector<EncodedPatient> toy_patients(const ModelDims& d, std::size_t n,
                                         Rng& rng) {
  std::vector<EncodedPatient> out;
  for (std::size_t i = 0; i < n; ++i) {
    EncodedPatient p;
    p.id = "toy" + std::to_string(i);
    p.stat.resize(d.static_dim);
    for (auto& v : p.stat) v = rng.uniform(-1.0, 1.0);
    const std::size_t tlen = 2 + rng.below(4);
    for (std::size_t t = 0; t < tlen; ++t) {
      Vector x(d.dynamic_dim);
      for (auto& v : x) v = double(rng.below(2));
      p.visits.push_back(std::move(x));
      std::array<std::uint8_t, kNumLabels> y{};
      const bool pos = p.stat[0] > 0.0 ? rng.uniform() < 0.9
                                       : rng.uniform() < 0.1;
      y[0] = pos;
      y[1] = pos;
      p.targets.push_back(y);
      p.evaluable.push_back(1);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<const EncodedPatient*> ptrs(const std::vector<EncodedPatient>& v) {
  std::vector<const EncodedPatient*> out;
  for (const auto& p : v) out.push_back(&p);
  return out;
}

EncodedPatient one_visit_patient(double prob_slot_truth) {
  EncodedPatient p;
  p.id = "x";
  p.visits.push_back(Vector{0.0});
  std::array<std::uint8_t, kNumLabels> y{};
  y[0] = prob_slot_truth > 0.5 ? 1 : 0;
  p.targets.push_back(y);
  p.evaluable.push_back(1);
  return p;
}

std::vector<double> snapshot(Net& net) {
  std::vector<double> out;
  for (TensorRef t : net.tensors()) {
    out.insert(out.end(), t.data, t.data + t.size);
  }
  return out;
}

}  // namespace

TEST_CASE("bce hand values") {
  // p = 0.5 costs ln 2 per term regardless of the truth bit
  EncodedPatient p = one_visit_patient(1.0);
  std::vector<double> probs(kNumLabels, 0.5);
  CHECK(bce_loss(probs, p) ==
        doctest::Approx(kNumLabels * std::log(2.0)).epsilon(1e-12));

  // confident and right is cheap; confident and wrong is -log(1 - p)
  std::vector<double> conf(kNumLabels, 0.9);
  const double expect = -std::log(0.9) - 5.0 * std::log(0.1);
  CHECK(bce_loss(conf, p) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("bce sums only evaluable visits") {
  EncodedPatient p = one_visit_patient(1.0);
  p.visits.push_back(Vector{0.0});
  p.targets.push_back({});
  p.evaluable.push_back(0);  // censored
  std::vector<double> probs(2 * kNumLabels, 0.5);
  CHECK(bce_loss(probs, p) ==
        doctest::Approx(kNumLabels * std::log(2.0)).epsilon(1e-12));
  CHECK(evaluable_terms(p) == std::size_t(kNumLabels));

  std::vector<double> g = bce_grad(probs, p);
  for (int k = 0; k < kNumLabels; ++k) {
    CHECK(g[kNumLabels + k] == 0.0);  // censored row contributes nothing
  }
}

TEST_CASE("bce additivity over visits") {
  Rng rng(1);
  EncodedPatient two = one_visit_patient(1.0);
  two.visits.push_back(Vector{0.0});
  std::array<std::uint8_t, kNumLabels> y{};
  y[2] = 1;
  two.targets.push_back(y);
  two.evaluable.push_back(1);

  std::vector<double> probs(2 * kNumLabels);
  for (auto& v : probs) v = rng.uniform(0.05, 0.95);

  EncodedPatient first = one_visit_patient(1.0);
  EncodedPatient second = one_visit_patient(0.0);
  second.targets[0] = y;
  std::vector<double> p1(probs.begin(), probs.begin() + kNumLabels);
  std::vector<double> p2(probs.begin() + kNumLabels, probs.end());
  CHECK(bce_loss(probs, two) ==
        doctest::Approx(bce_loss(p1, first) + bce_loss(p2, second))
            .epsilon(1e-12));
}

TEST_CASE("bce gradient matches finite differences through the sigmoid") {
  Rng rng(2);
  EncodedPatient p = one_visit_patient(1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Vector z(kNumLabels);
    for (auto& v : z) v = rng.uniform(-3.0, 3.0);
    std::vector<double> probs = sigmoid(z);
    std::vector<double> g = bce_grad(probs, p);
    const double h = 1e-6;
    for (int k = 0; k < kNumLabels; ++k) {
      Vector zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      const double fd =
          (bce_loss(sigmoid(zp), p) - bce_loss(sigmoid(zm), p)) / (2 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("inverted dropout statistics at rate 0.1") {
  Rng rng(3);
  Vector v(100000, 1.0);
  Vector out = dropout_apply(v, 0.1, rng, true);
  std::size_t zeros = 0;
  double sum = 0.0;
  for (double x : out) {
    if (x == 0.0) {
      ++zeros;
    } else {
      CHECK(x == doctest::Approx(1.0 / 0.9).epsilon(1e-12));
    }
    sum += x;
  }
  CHECK(double(zeros) / double(out.size()) == doctest::Approx(0.1).epsilon(0.05));
  CHECK(sum / double(out.size()) == doctest::Approx(1.0).epsilon(0.01));

  // inference mode is the identity
  Vector same = dropout_apply(v, 0.1, rng, false);
  CHECK(same == v);
}

TEST_CASE("adagrad hand arithmetic") {
  Vector theta{0.0}, state{0.0};
  Vector g1{3.0};
  adagrad_update(theta, g1, state, 0.1, 0.0);
  CHECK(state[0] == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-12));

  Vector g2{4.0};
  adagrad_update(theta, g2, state, 0.1, 0.0);
  CHECK(state[0] == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(theta[0] == doctest::Approx(-0.1 - 0.08).epsilon(1e-12));
}

TEST_CASE("rmsprop hand arithmetic and steady-state step size") {
  Vector theta{0.0}, state{0.0};
  Vector g{1.0};
  rmsprop_update(theta, g, state, 0.1, 0.9, 1e-8);
  CHECK(state[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(theta[0] == doctest::Approx(-0.1 / std::sqrt(0.1 + 1e-8)).epsilon(1e-9));

  // constant gradient: state -> g^2, so the per-step move tends to lr
  theta = {0.0};
  state = {0.0};
  double prev = 0.0;
  double step = 0.0;
  for (int i = 0; i < 200; ++i) {
    rmsprop_update(theta, g, state, 0.1, 0.9, 1e-8);
    step = prev - theta[0];
    prev = theta[0];
  }
  CHECK(step == doctest::Approx(0.1).epsilon(0.01));
}

TEST_CASE("optimizers act elementwise") {
  // updating a concatenation equals updating the slices independently
  Vector theta{0.5, -1.0, 2.0}, state{0.0, 1.0, 4.0};
  Vector grad{0.3, -0.2, 0.9};
  Vector theta_cat = theta, state_cat = state;
  adagrad_update(theta_cat, grad, state_cat, 0.05, 1e-8);
  for (std::size_t i = 0; i < 3; ++i) {
    Vector t{theta[i]}, s{state[i]}, g{grad[i]};
    adagrad_update(t, g, s, 0.05, 1e-8);
    CHECK(t[0] == theta_cat[i]);
    CHECK(s[0] == state_cat[i]);
  }
}

TEST_CASE("one epoch of training lowers the evaluation loss on most seeds") {
  ModelDims d = small_dims();
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng data_rng(900 + seed);
    auto patients = toy_patients(d, 40, data_rng);
    auto train = ptrs(patients);

    Rng init(seed);
    auto net = make_net(Arch::Gru, d, init);
    auto opt = net->clone_zeroed();
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.dropout_rate = 0.0;
    cfg.batch = 8;

    const double before = cohort_bce(*net, train).per_term();
    Rng epoch_rng(seed * 31 + 7);
    train_epoch(*net, train, cfg, *opt, epoch_rng);
    const double after = cohort_bce(*net, train).per_term();
    if (after < before) ++improved;
  }
  CHECK(improved >= 9);
}

TEST_CASE("zero learning rate leaves parameters bitwise untouched") {
  ModelDims d = small_dims();
  Rng data_rng(5);
  auto patients = toy_patients(d, 20, data_rng);
  auto train = ptrs(patients);

  Rng init(6);
  auto net = make_net(Arch::Lstm, d, init);
  auto opt = net->clone_zeroed();
  std::vector<double> before = snapshot(*net);

  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  Rng epoch_rng(7);
  train_epoch(*net, train, cfg, *opt, epoch_rng);
  CHECK(snapshot(*net) == before);
}

TEST_CASE("with lr 0 the summed epoch loss is invariant to the batch size") {
  ModelDims d = small_dims();
  Rng data_rng(8);
  auto patients = toy_patients(d, 30, data_rng);
  auto train = ptrs(patients);

  double losses[3];
  std::size_t batches[3] = {1, 7, 30};
  for (int i = 0; i < 3; ++i) {
    Rng init(9);
    auto net = make_net(Arch::Rnn, d, init);
    auto opt = net->clone_zeroed();
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.dropout_rate = 0.1;
    cfg.batch = batches[i];
    Rng epoch_rng(10);
    losses[i] = train_epoch(*net, train, cfg, *opt, epoch_rng);
  }
  CHECK(losses[0] == losses[1]);
  CHECK(losses[1] == losses[2]);
}

TEST_CASE("train_epoch is deterministic given identical rngs") {
  ModelDims d = small_dims();
  Rng data_rng(11);
  auto patients = toy_patients(d, 25, data_rng);
  auto train = ptrs(patients);

  std::vector<double> snaps[2];
  for (int rep = 0; rep < 2; ++rep) {
    Rng init(12);
    auto net = make_net(Arch::Gru, d, init);
    auto opt = net->clone_zeroed();
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.batch = 4;
    Rng epoch_rng(13);
    train_epoch(*net, train, cfg, *opt, epoch_rng);
    snaps[rep] = snapshot(*net);
  }
  CHECK(snaps[0] == snaps[1]);
}

TEST_CASE("patience zero stops one epoch past the best") {
  ModelDims d = small_dims();
  Rng data_rng(14);
  auto patients = toy_patients(d, 24, data_rng);
  std::vector<const EncodedPatient*> train, val;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    (i < 16 ? train : val).push_back(&patients[i]);
  }

  Rng init(15);
  auto net = make_net(Arch::LogReg, d, init);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;  // nothing changes, so epoch 0 stays the best
  cfg.patience = 0;
  cfg.max_epochs = 50;
  FitResult r = fit(std::move(net), train, val, cfg);
  CHECK(r.history.best_epoch == 0);
  CHECK(r.history.val_auprc.size() == 2);  // epoch 0 best, epoch 1 triggers stop
}

TEST_CASE("a small model overfits a tiny training set") {
  ModelDims d = small_dims();
  Rng data_rng(16);
  auto patients = toy_patients(d, 6, data_rng);
  auto train = ptrs(patients);

  Rng init(17);
  auto net = make_net(Arch::LogReg, d, init);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.dropout_rate = 0.0;
  cfg.batch = 6;
  cfg.max_epochs = 300;
  cfg.patience = 300;
  FitResult r = fit(std::move(net), train, train, cfg);
  CHECK(cohort_bce(*r.net, train).per_term() < 0.25);
}

TEST_CASE("fit end-to-end is deterministic") {
  ModelDims d = small_dims();
  Rng data_rng(18);
  auto patients = toy_patients(d, 24, data_rng);
  std::vector<const EncodedPatient*> train, val;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    (i < 16 ? train : val).push_back(&patients[i]);
  }

  std::vector<double> snaps[2];
  for (int rep = 0; rep < 2; ++rep) {
    Rng init(19);
    auto net = make_net(Arch::Gru, d, init);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.max_epochs = 5;
    cfg.patience = 5;
    cfg.seed = 20;
    FitResult r = fit(std::move(net), train, val, cfg);
    snaps[rep] = snapshot(*r.net);
  }
  CHECK(snaps[0] == snaps[1]);
}

TEST_CASE("grid search prefers the lexicographically smaller config on ties") {
  TrainConfig a, b;
  a.learning_rate = 0.01;
  b.learning_rate = 0.1;
  CHECK(a < b);
  CHECK_FALSE(b < a);
  CHECK_FALSE(a < a);
}

TEST_CASE("default grid contains the reference configuration") {
  bool found = false;
  for (const TrainConfig& c : default_grid()) {
    if (c.rank == 50 && c.hidden == 100 && c.learning_rate == 0.1 &&
        c.dropout_rate == 0.1 && c.optimizer == Optimizer::Adagrad) {
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("train config round-trips through key=value text") {
  KVConfig kv = KVConfig::from_string(
      "rank=20\nhidden=30\nlearning_rate=0.05\ndropout_rate=0.2\n"
      "optimizer=rmsprop\nmax_epochs=17\npatience=4\nbatch=8\nseed=99\n");
  TrainConfig c = TrainConfig::from_kv(kv);
  CHECK(c.rank == 20);
  CHECK(c.hidden == 30);
  CHECK(c.learning_rate == 0.05);
  CHECK(c.dropout_rate == 0.2);
  CHECK(c.optimizer == Optimizer::RmsProp);
  CHECK(c.max_epochs == 17);
  CHECK(c.patience == 4);
  CHECK(c.batch == 8);
  CHECK(c.seed == 99);
  CHECK(kv.unknown_keys().empty());
}

TEST_CASE("unknown config keys are rejected by name") {
  KVConfig kv = KVConfig::from_string("rank=20\nlerning_rate=0.1\n");
  TrainConfig::from_kv(kv);
  CHECK_THROWS_WITH_AS(kv.reject_unknown_keys(),
                       doctest::Contains("lerning_rate"),
                       std::invalid_argument);
}
