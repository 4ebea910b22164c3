#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "sdrnn/numerics.hpp"

namespace sdrnn {

enum class CellKind { Rnn, Lstm, Gru };

enum class RnnActivation { Tanh, Sigmoid };

// h_t = act(W x_t + U h_{t-1}); no bias term.
struct RnnCellParams {
  Matrix w;  // hidden x input
  Matrix u;  // hidden x hidden
  RnnActivation activation = RnnActivation::Tanh;

  RnnCellParams() = default;
  RnnCellParams(std::size_t hidden, std::size_t input)
      : w(hidden, input), u(hidden, hidden) {}
  std::size_t hidden() const { return w.rows; }
};

// Graves-style gated cell with diagonal peepholes. The output gate reads
// c_{t-1}, not c_t (see gate pre-activation below).
struct LstmCellParams {
  Matrix w_xi, w_xr, w_xc, w_xo;  // hidden x input
  Matrix w_hi, w_hr, w_hc, w_ho;  // hidden x hidden
  Vector w_ci, w_cr, w_co;        // diagonal peepholes
  Vector b_i, b_r, b_c, b_o;

  LstmCellParams() = default;
  LstmCellParams(std::size_t hidden, std::size_t input)
      : w_xi(hidden, input), w_xr(hidden, input), w_xc(hidden, input),
        w_xo(hidden, input), w_hi(hidden, hidden), w_hr(hidden, hidden),
        w_hc(hidden, hidden), w_ho(hidden, hidden), w_ci(hidden, 0.0),
        w_cr(hidden, 0.0), w_co(hidden, 0.0), b_i(hidden, 0.0),
        b_r(hidden, 0.0), b_c(hidden, 0.0), b_o(hidden, 0.0) {}
  std::size_t hidden() const { return w_xi.rows; }
};

// Update/reset gated cell; no bias terms.
struct GruCellParams {
  Matrix w_r, w_z, w;  // hidden x input
  Matrix u_r, u_z, u;  // hidden x hidden

  GruCellParams() = default;
  GruCellParams(std::size_t hidden, std::size_t input)
      : w_r(hidden, input), w_z(hidden, input), w(hidden, input),
        u_r(hidden, hidden), u_z(hidden, hidden), u(hidden, hidden) {}
  std::size_t hidden() const { return w.rows; }
};

using CellParams = std::variant<RnnCellParams, LstmCellParams, GruCellParams>;

CellKind cell_kind(const CellParams& p);
std::size_t cell_hidden(const CellParams& p);
bool cell_has_cstate(const CellParams& p);

// Test hook: additive pre-activation offsets per gate, used by tests to pin
// gates open or closed. Unset vectors are treated as zero.
struct GateOffsets {
  Vector input_gate;      // LSTM i_t
  Vector forget_gate;     // LSTM r_t
  Vector output_gate;     // LSTM o_t
  Vector update_gate;     // GRU z_t
  Vector reset_gate;      // GRU r_t
};

// Everything the backward pass needs from one forward step.
struct StepTrace {
  Vector x;       // input to the step
  Vector h_prev;
  Vector c_prev;  // LSTM only
  Vector h;
  Vector c;       // LSTM only
  // gates / candidates
  Vector gate_i, gate_r, gate_o;  // LSTM
  Vector gate_z, gate_rs;         // GRU update / reset
  Vector cand;                    // tanh candidate (LSTM g_t, GRU h~_t)
};

// One forward step per cell type. h_prev (and c_prev for LSTM) must match the
// hidden size; the new state and a trace are produced.
void rnn_step(const RnnCellParams& p, const Vector& x, const Vector& h_prev,
              StepTrace& tr);
void lstm_step(const LstmCellParams& p, const Vector& x, const Vector& h_prev,
               const Vector& c_prev, StepTrace& tr,
               const GateOffsets* test_offsets = nullptr);
void gru_step(const GruCellParams& p, const Vector& x, const Vector& h_prev,
              StepTrace& tr, const GateOffsets* test_offsets = nullptr);

// Dispatch over the variant. state.h / state.c are updated in place.
struct CellState {
  Vector h;
  Vector c;  // empty unless LSTM
};
CellState cell_initial_state(const CellParams& p);
void cell_step(const CellParams& p, const Vector& x, CellState& state,
               StepTrace& tr, const GateOffsets* test_offsets = nullptr);

// Gradient buffers share the parameter layout; an instance of the params
// struct with zeroed tensors serves as the accumulator.
std::vector<TensorRef> cell_tensor_refs(CellParams& p, const std::string& prefix);

struct CellBackwardResult {
  std::vector<Vector> dx;  // per-step input gradients
  Vector dh0;              // gradient w.r.t. the initial hidden state
  Vector dc0;              // LSTM only
};

// Backward through a whole sequence of traces. `upstream[t]` is dL/dh_t from
// outside the cell. Accumulates parameter gradients into `grad` (same layout,
// pre-zeroed or accumulating).
CellBackwardResult cell_backward(const CellParams& p,
                                 const std::vector<StepTrace>& traces,
                                 const std::vector<Vector>& upstream,
                                 CellParams& grad);

}  // namespace sdrnn
