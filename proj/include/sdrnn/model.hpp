#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sdrnn/cells.hpp"
#include "sdrnn/cohort.hpp"
#include "sdrnn/numerics.hpp"

namespace sdrnn {

inline constexpr double kProbEps = 1e-7;

enum class Arch { Rnn, Lstm, Gru, Tle, LogReg, StaticOnly, Random };

const char* arch_name(Arch a);
std::optional<Arch> parse_arch(const std::string& s);

struct ModelDims {
  std::size_t static_dim = 0;
  std::size_t dynamic_dim = 0;
  std::size_t labels = kNumLabels;
  std::size_t rank = 50;
  std::size_t hidden = 100;
  std::size_t tle_n = 3;  // recent-visit window for the feedforward baseline
};

// Weight init: every matrix uniform on [-s, s] with s = sqrt(6/(fan_in +
// fan_out)); bias vectors zero.
void xavier_init(Matrix& m, Rng& rng);

// Per-patient forward state kept for the backward pass. Concrete models
// define their own derived trace.
struct Trace {
  virtual ~Trace() = default;
};

// Present only during training; absent means inference (dropout = identity).
struct DropoutCtx {
  double rate = 0.0;
  Rng* rng = nullptr;
};

class Net {
 public:
  virtual ~Net() = default;
  virtual Arch arch() const = 0;
  const ModelDims& dims() const { return dims_; }

  // Named parameter tensors in a fixed order shared by gradients, optimizer
  // state and checkpoints.
  virtual std::vector<TensorRef> tensors() = 0;

  virtual std::unique_ptr<Net> clone() const = 0;
  // Same shapes, all tensors zero. Used for gradient and optimizer buffers.
  std::unique_ptr<Net> clone_zeroed() const;

  // Emits one probability row per visit (T x labels, row-major), every entry
  // clamped to [kProbEps, 1 - kProbEps].
  virtual std::vector<double> forward(const EncodedPatient& p,
                                      std::unique_ptr<Trace>& trace,
                                      const DropoutCtx* dropout) const = 0;

  // dz is dL/d(pre-sigmoid), T x labels. Accumulates into `grad` (same
  // concrete type).
  virtual void backward(const EncodedPatient& p, const Trace& trace,
                        const std::vector<double>& dz, Net& grad) const = 0;

  virtual bool trainable() const { return true; }

 protected:
  explicit Net(ModelDims d) : dims_(d) {}
  ModelDims dims_;
};

// Recurrent fusion architecture: linear embeddings for both branches, a
// one-hidden-layer tanh map for the static branch, a recurrent cell for the
// dynamic branch, and a shared sigmoid output over the concatenated hidden
// states.
class FusionNet : public Net {
 public:
  FusionNet(CellKind kind, ModelDims d, Rng& rng,
            RnnActivation rnn_act = RnnActivation::Tanh);

  Arch arch() const override;
  std::vector<TensorRef> tensors() override;
  std::unique_ptr<Net> clone() const override;
  std::vector<double> forward(const EncodedPatient& p,
                              std::unique_ptr<Trace>& trace,
                              const DropoutCtx* dropout) const override;
  void backward(const EncodedPatient& p, const Trace& trace,
                const std::vector<double>& dz, Net& grad) const override;

  // test hook: pre-activation gate offsets forwarded to every cell step
  const GateOffsets* test_gate_offsets = nullptr;

  Matrix embed_static;   // A: rank x static_dim
  Matrix embed_dynamic;  // B: rank x dynamic_dim
  Matrix w_static;       // hidden x rank
  Vector b_static;
  CellParams cell;
  Matrix w_out;  // labels x (hidden + hidden)
  Vector b_out;
};

// Feedforward baseline over a background vector (static features plus the
// running mean of prior visits) and the n most recent visit latents, stacked
// horizontally.
class TleNet : public Net {
 public:
  TleNet(ModelDims d, Rng& rng);

  Arch arch() const override { return Arch::Tle; }
  std::vector<TensorRef> tensors() override;
  std::unique_ptr<Net> clone() const override;
  std::vector<double> forward(const EncodedPatient& p,
                              std::unique_ptr<Trace>& trace,
                              const DropoutCtx* dropout) const override;
  void backward(const EncodedPatient& p, const Trace& trace,
                const std::vector<double>& dz, Net& grad) const override;

  // Background vector for visit t: concat(static, mean of visits before t).
  Vector background(const EncodedPatient& p, std::size_t t) const;

  Matrix embed_background;  // rank x (static_dim + dynamic_dim)
  Matrix embed_visit;       // rank x dynamic_dim, shared across the n slots
  Matrix w_hidden;          // hidden x (n+1)*rank
  Vector b_hidden;
  Matrix w_out;  // labels x hidden
  Vector b_out;
};

// features = concat(static, current visit, running mean of prior visits)
class LogRegNet : public Net {
 public:
  LogRegNet(ModelDims d, Rng& rng);

  Arch arch() const override { return Arch::LogReg; }
  std::vector<TensorRef> tensors() override;
  std::unique_ptr<Net> clone() const override;
  std::vector<double> forward(const EncodedPatient& p,
                              std::unique_ptr<Trace>& trace,
                              const DropoutCtx* dropout) const override;
  void backward(const EncodedPatient& p, const Trace& trace,
                const std::vector<double>& dz, Net& grad) const override;

  Vector features(const EncodedPatient& p, std::size_t t) const;

  Matrix w;  // labels x (static + 2*dynamic)
  Vector b;
};

// Static-branch-only feedforward model; identical prediction for every visit
// of one patient.
class StaticOnlyNet : public Net {
 public:
  StaticOnlyNet(ModelDims d, Rng& rng);

  Arch arch() const override { return Arch::StaticOnly; }
  std::vector<TensorRef> tensors() override;
  std::unique_ptr<Net> clone() const override;
  std::vector<double> forward(const EncodedPatient& p,
                              std::unique_ptr<Trace>& trace,
                              const DropoutCtx* dropout) const override;
  void backward(const EncodedPatient& p, const Trace& trace,
                const std::vector<double>& dz, Net& grad) const override;

  Matrix embed_static;  // rank x static_dim
  Matrix w_hidden;      // hidden x rank
  Vector b_hidden;
  Matrix w_out;  // labels x hidden
  Vector b_out;
};

// Uninformed baseline: i.i.d. uniform scores on (eps, 1-eps), deterministic
// per (seed, patient id, visit, label). Never trained.
class RandomNet : public Net {
 public:
  RandomNet(ModelDims d, std::uint64_t seed);

  Arch arch() const override { return Arch::Random; }
  std::vector<TensorRef> tensors() override { return {}; }
  std::unique_ptr<Net> clone() const override;
  std::vector<double> forward(const EncodedPatient& p,
                              std::unique_ptr<Trace>& trace,
                              const DropoutCtx* dropout) const override;
  void backward(const EncodedPatient&, const Trace&,
                const std::vector<double>&, Net&) const override {}
  bool trainable() const override { return false; }

  std::uint64_t seed;
};

std::unique_ptr<Net> make_net(Arch arch, const ModelDims& dims, Rng& rng,
                              std::uint64_t random_seed = 0);

}  // namespace sdrnn
