#include "sdrnn/cells.hpp"

#include <stdexcept>

namespace sdrnn {

CellKind cell_kind(const CellParams& p) {
  if (std::holds_alternative<RnnCellParams>(p)) return CellKind::Rnn;
  if (std::holds_alternative<LstmCellParams>(p)) return CellKind::Lstm;
  return CellKind::Gru;
}

std::size_t cell_hidden(const CellParams& p) {
  return std::visit([](const auto& c) { return c.hidden(); }, p);
}

bool cell_has_cstate(const CellParams& p) {
  return std::holds_alternative<LstmCellParams>(p);
}

static void add_offset(Vector& pre, const Vector& off) {
  if (off.empty()) return;
  if (off.size() != pre.size()) {
    throw std::invalid_argument("gate offset length mismatch");
  }
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += off[i];
}

void rnn_step(const RnnCellParams& p, const Vector& x, const Vector& h_prev,
              StepTrace& tr) {
  tr = StepTrace{};
  tr.x = x;
  tr.h_prev = h_prev;
  Vector pre = gemv(p.w, x);
  axpy(pre, 1.0, gemv(p.u, h_prev));
  tr.h = (p.activation == RnnActivation::Tanh) ? tanh_act(pre) : sigmoid(pre);
}

void lstm_step(const LstmCellParams& p, const Vector& x, const Vector& h_prev,
               const Vector& c_prev, StepTrace& tr,
               const GateOffsets* test_offsets) {
  tr = StepTrace{};
  tr.x = x;
  tr.h_prev = h_prev;
  tr.c_prev = c_prev;
  const std::size_t n = p.hidden();

  Vector a_i = gemv(p.w_xi, x);
  axpy(a_i, 1.0, gemv(p.w_hi, h_prev));
  Vector a_r = gemv(p.w_xr, x);
  axpy(a_r, 1.0, gemv(p.w_hr, h_prev));
  Vector a_c = gemv(p.w_xc, x);
  axpy(a_c, 1.0, gemv(p.w_hc, h_prev));
  Vector a_o = gemv(p.w_xo, x);
  axpy(a_o, 1.0, gemv(p.w_ho, h_prev));
  for (std::size_t k = 0; k < n; ++k) {
    a_i[k] += p.w_ci[k] * c_prev[k] + p.b_i[k];
    a_r[k] += p.w_cr[k] * c_prev[k] + p.b_r[k];
    // output gate reads c_{t-1}
    a_o[k] += p.w_co[k] * c_prev[k] + p.b_o[k];
    a_c[k] += p.b_c[k];
  }
  if (test_offsets) {
    add_offset(a_i, test_offsets->input_gate);
    add_offset(a_r, test_offsets->forget_gate);
    add_offset(a_o, test_offsets->output_gate);
  }
  tr.gate_i = sigmoid(a_i);
  tr.gate_r = sigmoid(a_r);
  tr.gate_o = sigmoid(a_o);
  tr.cand = tanh_act(a_c);
  tr.c.resize(n);
  tr.h.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    tr.c[k] = tr.gate_r[k] * c_prev[k] + tr.gate_i[k] * tr.cand[k];
    tr.h[k] = tr.gate_o[k] * tanh1(tr.c[k]);
  }
}

void gru_step(const GruCellParams& p, const Vector& x, const Vector& h_prev,
              StepTrace& tr, const GateOffsets* test_offsets) {
  tr = StepTrace{};
  tr.x = x;
  tr.h_prev = h_prev;
  const std::size_t n = p.hidden();

  Vector a_r = gemv(p.w_r, x);
  axpy(a_r, 1.0, gemv(p.u_r, h_prev));
  Vector a_z = gemv(p.w_z, x);
  axpy(a_z, 1.0, gemv(p.u_z, h_prev));
  if (test_offsets) {
    add_offset(a_r, test_offsets->reset_gate);
    add_offset(a_z, test_offsets->update_gate);
  }
  tr.gate_rs = sigmoid(a_r);
  tr.gate_z = sigmoid(a_z);

  Vector rh(n);
  for (std::size_t k = 0; k < n; ++k) rh[k] = tr.gate_rs[k] * h_prev[k];
  Vector a_h = gemv(p.w, x);
  axpy(a_h, 1.0, gemv(p.u, rh));
  tr.cand = tanh_act(a_h);

  tr.h.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    tr.h[k] = (1.0 - tr.gate_z[k]) * h_prev[k] + tr.gate_z[k] * tr.cand[k];
  }
}

CellState cell_initial_state(const CellParams& p) {
  CellState s;
  s.h.assign(cell_hidden(p), 0.0);
  if (cell_has_cstate(p)) s.c.assign(cell_hidden(p), 0.0);
  return s;
}

void cell_step(const CellParams& p, const Vector& x, CellState& state,
               StepTrace& tr, const GateOffsets* test_offsets) {
  if (const auto* r = std::get_if<RnnCellParams>(&p)) {
    rnn_step(*r, x, state.h, tr);
    state.h = tr.h;
  } else if (const auto* l = std::get_if<LstmCellParams>(&p)) {
    lstm_step(*l, x, state.h, state.c, tr, test_offsets);
    state.h = tr.h;
    state.c = tr.c;
  } else {
    gru_step(std::get<GruCellParams>(p), x, state.h, tr, test_offsets);
    state.h = tr.h;
  }
}

std::vector<TensorRef> cell_tensor_refs(CellParams& p,
                                        const std::string& prefix) {
  std::vector<TensorRef> refs;
  if (auto* r = std::get_if<RnnCellParams>(&p)) {
    refs.push_back(ref(prefix + "W", r->w));
    refs.push_back(ref(prefix + "U", r->u));
  } else if (auto* l = std::get_if<LstmCellParams>(&p)) {
    refs.push_back(ref(prefix + "W_xi", l->w_xi));
    refs.push_back(ref(prefix + "W_xr", l->w_xr));
    refs.push_back(ref(prefix + "W_xc", l->w_xc));
    refs.push_back(ref(prefix + "W_xo", l->w_xo));
    refs.push_back(ref(prefix + "W_hi", l->w_hi));
    refs.push_back(ref(prefix + "W_hr", l->w_hr));
    refs.push_back(ref(prefix + "W_hc", l->w_hc));
    refs.push_back(ref(prefix + "W_ho", l->w_ho));
    refs.push_back(ref(prefix + "w_ci", l->w_ci));
    refs.push_back(ref(prefix + "w_cr", l->w_cr));
    refs.push_back(ref(prefix + "w_co", l->w_co));
    refs.push_back(ref(prefix + "b_i", l->b_i));
    refs.push_back(ref(prefix + "b_r", l->b_r));
    refs.push_back(ref(prefix + "b_c", l->b_c));
    refs.push_back(ref(prefix + "b_o", l->b_o));
  } else {
    auto& g = std::get<GruCellParams>(p);
    refs.push_back(ref(prefix + "W_r", g.w_r));
    refs.push_back(ref(prefix + "W_z", g.w_z));
    refs.push_back(ref(prefix + "W", g.w));
    refs.push_back(ref(prefix + "U_r", g.u_r));
    refs.push_back(ref(prefix + "U_z", g.u_z));
    refs.push_back(ref(prefix + "U", g.u));
  }
  return refs;
}

namespace {

CellBackwardResult rnn_backward(const RnnCellParams& p,
                                const std::vector<StepTrace>& traces,
                                const std::vector<Vector>& upstream,
                                RnnCellParams& g) {
  const std::size_t tlen = traces.size();
  const std::size_t n = p.hidden();
  std::vector<Vector> dx(tlen);
  Vector dh_next(n, 0.0);
  for (std::size_t ti = tlen; ti-- > 0;) {
    const StepTrace& tr = traces[ti];
    Vector dh = upstream[ti];
    axpy(dh, 1.0, dh_next);
    Vector dpre(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double hk = tr.h[k];
      const double dact = (p.activation == RnnActivation::Tanh)
                              ? (1.0 - hk * hk)
                              : hk * (1.0 - hk);
      dpre[k] = dh[k] * dact;
    }
    add_outer(g.w, dpre, tr.x);
    add_outer(g.u, dpre, tr.h_prev);
    dx[ti] = gemv_t(p.w, dpre);
    dh_next = gemv_t(p.u, dpre);
  }
  return {std::move(dx), std::move(dh_next), {}};
}

CellBackwardResult lstm_backward(const LstmCellParams& p,
                                 const std::vector<StepTrace>& traces,
                                 const std::vector<Vector>& upstream,
                                 LstmCellParams& g) {
  const std::size_t tlen = traces.size();
  const std::size_t n = p.hidden();
  std::vector<Vector> dx(tlen);
  Vector dh_next(n, 0.0);
  Vector dc_next(n, 0.0);
  for (std::size_t ti = tlen; ti-- > 0;) {
    const StepTrace& tr = traces[ti];
    Vector dh = upstream[ti];
    axpy(dh, 1.0, dh_next);

    Vector da_i(n), da_r(n), da_c(n), da_o(n), dc(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double tc = tanh1(tr.c[k]);
      const double do_k = dh[k] * tc;
      da_o[k] = do_k * tr.gate_o[k] * (1.0 - tr.gate_o[k]);
      dc[k] = dh[k] * tr.gate_o[k] * (1.0 - tc * tc) + dc_next[k];
      const double di = dc[k] * tr.cand[k];
      const double dg = dc[k] * tr.gate_i[k];
      const double dr = dc[k] * tr.c_prev[k];
      da_i[k] = di * tr.gate_i[k] * (1.0 - tr.gate_i[k]);
      da_r[k] = dr * tr.gate_r[k] * (1.0 - tr.gate_r[k]);
      da_c[k] = dg * (1.0 - tr.cand[k] * tr.cand[k]);
    }

    add_outer(g.w_xi, da_i, tr.x);
    add_outer(g.w_xr, da_r, tr.x);
    add_outer(g.w_xc, da_c, tr.x);
    add_outer(g.w_xo, da_o, tr.x);
    add_outer(g.w_hi, da_i, tr.h_prev);
    add_outer(g.w_hr, da_r, tr.h_prev);
    add_outer(g.w_hc, da_c, tr.h_prev);
    add_outer(g.w_ho, da_o, tr.h_prev);
    for (std::size_t k = 0; k < n; ++k) {
      g.w_ci[k] += da_i[k] * tr.c_prev[k];
      g.w_cr[k] += da_r[k] * tr.c_prev[k];
      g.w_co[k] += da_o[k] * tr.c_prev[k];
      g.b_i[k] += da_i[k];
      g.b_r[k] += da_r[k];
      g.b_c[k] += da_c[k];
      g.b_o[k] += da_o[k];
    }

    Vector dxi = gemv_t(p.w_xi, da_i);
    axpy(dxi, 1.0, gemv_t(p.w_xr, da_r));
    axpy(dxi, 1.0, gemv_t(p.w_xc, da_c));
    axpy(dxi, 1.0, gemv_t(p.w_xo, da_o));
    dx[ti] = std::move(dxi);

    Vector dhp = gemv_t(p.w_hi, da_i);
    axpy(dhp, 1.0, gemv_t(p.w_hr, da_r));
    axpy(dhp, 1.0, gemv_t(p.w_hc, da_c));
    axpy(dhp, 1.0, gemv_t(p.w_ho, da_o));
    dh_next = std::move(dhp);

    for (std::size_t k = 0; k < n; ++k) {
      dc_next[k] = dc[k] * tr.gate_r[k] + da_i[k] * p.w_ci[k] +
                   da_r[k] * p.w_cr[k] + da_o[k] * p.w_co[k];
    }
  }
  return {std::move(dx), std::move(dh_next), std::move(dc_next)};
}

CellBackwardResult gru_backward(const GruCellParams& p,
                                const std::vector<StepTrace>& traces,
                                const std::vector<Vector>& upstream,
                                GruCellParams& g) {
  const std::size_t tlen = traces.size();
  const std::size_t n = p.hidden();
  std::vector<Vector> dx(tlen);
  Vector dh_next(n, 0.0);
  for (std::size_t ti = tlen; ti-- > 0;) {
    const StepTrace& tr = traces[ti];
    Vector dh = upstream[ti];
    axpy(dh, 1.0, dh_next);

    Vector da_z(n), da_h(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double dz = dh[k] * (tr.cand[k] - tr.h_prev[k]);
      da_z[k] = dz * tr.gate_z[k] * (1.0 - tr.gate_z[k]);
      const double dcand = dh[k] * tr.gate_z[k];
      da_h[k] = dcand * (1.0 - tr.cand[k] * tr.cand[k]);
    }
    Vector drh = gemv_t(p.u, da_h);
    Vector da_r(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double dr = drh[k] * tr.h_prev[k];
      da_r[k] = dr * tr.gate_rs[k] * (1.0 - tr.gate_rs[k]);
    }

    Vector rh(n);
    for (std::size_t k = 0; k < n; ++k) rh[k] = tr.gate_rs[k] * tr.h_prev[k];
    add_outer(g.w, da_h, tr.x);
    add_outer(g.u, da_h, rh);
    add_outer(g.w_r, da_r, tr.x);
    add_outer(g.u_r, da_r, tr.h_prev);
    add_outer(g.w_z, da_z, tr.x);
    add_outer(g.u_z, da_z, tr.h_prev);

    Vector dxi = gemv_t(p.w, da_h);
    axpy(dxi, 1.0, gemv_t(p.w_r, da_r));
    axpy(dxi, 1.0, gemv_t(p.w_z, da_z));
    dx[ti] = std::move(dxi);

    Vector dhp(n);
    for (std::size_t k = 0; k < n; ++k) {
      dhp[k] = dh[k] * (1.0 - tr.gate_z[k]) + drh[k] * tr.gate_rs[k];
    }
    axpy(dhp, 1.0, gemv_t(p.u_r, da_r));
    axpy(dhp, 1.0, gemv_t(p.u_z, da_z));
    dh_next = std::move(dhp);
  }
  return {std::move(dx), std::move(dh_next), {}};
}

}  // namespace

CellBackwardResult cell_backward(const CellParams& p,
                                 const std::vector<StepTrace>& traces,
                                 const std::vector<Vector>& upstream,
                                 CellParams& grad) {
  if (traces.size() != upstream.size()) {
    throw std::invalid_argument("cell_backward: trace/upstream length mismatch");
  }
  if (const auto* r = std::get_if<RnnCellParams>(&p)) {
    return rnn_backward(*r, traces, upstream, std::get<RnnCellParams>(grad));
  }
  if (const auto* l = std::get_if<LstmCellParams>(&p)) {
    return lstm_backward(*l, traces, upstream, std::get<LstmCellParams>(grad));
  }
  return gru_backward(std::get<GruCellParams>(p), traces, upstream,
                      std::get<GruCellParams>(grad));
}

}  // namespace sdrnn
