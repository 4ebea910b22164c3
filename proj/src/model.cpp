#include "sdrnn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace sdrnn {

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::Rnn: return "rnn";
    case Arch::Lstm: return "lstm";
    case Arch::Gru: return "gru";
    case Arch::Tle: return "tle";
    case Arch::LogReg: return "logreg";
    case Arch::StaticOnly: return "static";
    case Arch::Random: return "random";
  }
  return "?";
}

std::optional<Arch> parse_arch(const std::string& s) {
  if (s == "rnn") return Arch::Rnn;
  if (s == "lstm") return Arch::Lstm;
  if (s == "gru") return Arch::Gru;
  if (s == "tle") return Arch::Tle;
  if (s == "logreg") return Arch::LogReg;
  if (s == "static") return Arch::StaticOnly;
  if (s == "random") return Arch::Random;
  return std::nullopt;
}

void xavier_init(Matrix& m, Rng& rng) {
  const double s = std::sqrt(6.0 / double(m.rows + m.cols));
  for (double& v : m.a) v = rng.uniform(-s, s);
}

static void uniform_init(Vector& v, double s, Rng& rng) {
  for (double& x : v) x = rng.uniform(-s, s);
}

static double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

// mask entries are 0 or 1/(1-rate); empty mask = identity
static Vector make_mask(std::size_t n, const DropoutCtx* d) {
  Vector m;
  if (!d || d->rate <= 0.0 || !d->rng) return m;
  m.resize(n);
  const double scale = 1.0 / (1.0 - d->rate);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = (d->rng->uniform() < d->rate) ? 0.0 : scale;
  }
  return m;
}

static void apply_mask(Vector& v, const Vector& m) {
  if (m.empty()) return;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= m[i];
}

std::unique_ptr<Net> Net::clone_zeroed() const {
  auto c = clone();
  for (auto& t : c->tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = 0.0;
  }
  return c;
}

// ---------------------------------------------------------------------------
// FusionNet

namespace {

struct FusionTrace : Trace {
  Vector xs_e_d;  // masked static embedding
  Vector hs;      // static-branch hidden state
  Vector mask_static;
  std::vector<Vector> mask_visit;
  std::vector<Vector> mask_cat;
  std::vector<Vector> cat_d;  // masked concat fed to the output layer
  std::vector<StepTrace> steps;
};

}  // namespace

FusionNet::FusionNet(CellKind kind, ModelDims d, Rng& rng, RnnActivation act)
    : Net(d) {
  embed_static = Matrix(d.rank, d.static_dim);
  embed_dynamic = Matrix(d.rank, d.dynamic_dim);
  w_static = Matrix(d.hidden, d.rank);
  b_static.assign(d.hidden, 0.0);
  switch (kind) {
    case CellKind::Rnn: {
      RnnCellParams c(d.hidden, d.rank);
      c.activation = act;
      cell = std::move(c);
      break;
    }
    case CellKind::Lstm:
      cell = LstmCellParams(d.hidden, d.rank);
      break;
    case CellKind::Gru:
      cell = GruCellParams(d.hidden, d.rank);
      break;
  }
  w_out = Matrix(d.labels, 2 * d.hidden);
  b_out.assign(d.labels, 0.0);

  xavier_init(embed_static, rng);
  xavier_init(embed_dynamic, rng);
  xavier_init(w_static, rng);
  for (auto& t : cell_tensor_refs(cell, "")) {
    if (t.name[0] == 'b') continue;  // biases stay zero
    double fan_in = t.dims.size() == 2 ? double(t.dims[1]) : double(t.dims[0]);
    double fan_out = double(t.dims[0]);
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    Rng* r = &rng;
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = r->uniform(-s, s);
  }
  xavier_init(w_out, rng);
}

Arch FusionNet::arch() const {
  switch (cell_kind(cell)) {
    case CellKind::Rnn: return Arch::Rnn;
    case CellKind::Lstm: return Arch::Lstm;
    case CellKind::Gru: return Arch::Gru;
  }
  return Arch::Gru;
}

std::vector<TensorRef> FusionNet::tensors() {
  std::vector<TensorRef> r;
  r.push_back(ref("A", embed_static));
  r.push_back(ref("B", embed_dynamic));
  r.push_back(ref("W_s", w_static));
  r.push_back(ref("b_s", b_static));
  for (auto& t : cell_tensor_refs(cell, "cell.")) r.push_back(std::move(t));
  r.push_back(ref("W_o", w_out));
  r.push_back(ref("b", b_out));
  return r;
}

std::unique_ptr<Net> FusionNet::clone() const {
  return std::make_unique<FusionNet>(*this);
}

std::vector<double> FusionNet::forward(const EncodedPatient& p,
                                       std::unique_ptr<Trace>& trace,
                                       const DropoutCtx* dropout) const {
  if (p.visits.empty()) {
    throw std::invalid_argument("forward: patient " + p.id + " has no visits");
  }
  auto tr = std::make_unique<FusionTrace>();
  const std::size_t tlen = p.visits.size();
  const std::size_t k = dims_.labels;
  const std::size_t h = dims_.hidden;

  Vector xs_e = gemv(embed_static, p.stat);
  tr->mask_static = make_mask(xs_e.size(), dropout);
  apply_mask(xs_e, tr->mask_static);
  tr->xs_e_d = xs_e;
  Vector a_s = gemv(w_static, xs_e);
  axpy(a_s, 1.0, b_static);
  tr->hs = tanh_act(a_s);

  tr->steps.resize(tlen);
  tr->mask_visit.resize(tlen);
  tr->mask_cat.resize(tlen);
  tr->cat_d.resize(tlen);

  CellState st = cell_initial_state(cell);
  std::vector<double> probs(tlen * k);
  for (std::size_t t = 0; t < tlen; ++t) {
    Vector xe = gemv(embed_dynamic, p.visits[t]);
    tr->mask_visit[t] = make_mask(xe.size(), dropout);
    apply_mask(xe, tr->mask_visit[t]);
    cell_step(cell, xe, st, tr->steps[t], test_gate_offsets);

    Vector cat(2 * h);
    for (std::size_t i = 0; i < h; ++i) cat[i] = tr->hs[i];
    for (std::size_t i = 0; i < h; ++i) cat[h + i] = st.h[i];
    tr->mask_cat[t] = make_mask(cat.size(), dropout);
    apply_mask(cat, tr->mask_cat[t]);
    tr->cat_d[t] = cat;

    Vector z = gemv(w_out, cat);
    axpy(z, 1.0, b_out);
    for (std::size_t j = 0; j < k; ++j) {
      probs[t * k + j] = clamp_prob(sigmoid1(z[j]));
    }
  }
  trace = std::move(tr);
  return probs;
}

void FusionNet::backward(const EncodedPatient& p, const Trace& trace,
                         const std::vector<double>& dz, Net& grad) const {
  const auto& tr = static_cast<const FusionTrace&>(trace);
  auto& g = static_cast<FusionNet&>(grad);
  const std::size_t tlen = p.visits.size();
  const std::size_t k = dims_.labels;
  const std::size_t h = dims_.hidden;
  if (dz.size() != tlen * k) {
    throw std::invalid_argument("backward: dz size mismatch");
  }

  Vector dhs(h, 0.0);
  std::vector<Vector> upstream(tlen);
  for (std::size_t t = 0; t < tlen; ++t) {
    Vector dzt(dz.begin() + t * k, dz.begin() + (t + 1) * k);
    add_outer(g.w_out, dzt, tr.cat_d[t]);
    axpy(g.b_out, 1.0, dzt);
    Vector dcat = gemv_t(w_out, dzt);
    apply_mask(dcat, tr.mask_cat[t]);
    for (std::size_t i = 0; i < h; ++i) dhs[i] += dcat[i];
    upstream[t].assign(dcat.begin() + h, dcat.end());
  }

  std::vector<Vector> dxe = cell_backward(cell, tr.steps, upstream, g.cell).dx;
  for (std::size_t t = 0; t < tlen; ++t) {
    apply_mask(dxe[t], tr.mask_visit[t]);
    add_outer(g.embed_dynamic, dxe[t], p.visits[t]);
  }

  Vector da_s(h);
  for (std::size_t i = 0; i < h; ++i) {
    da_s[i] = dhs[i] * (1.0 - tr.hs[i] * tr.hs[i]);
  }
  add_outer(g.w_static, da_s, tr.xs_e_d);
  axpy(g.b_static, 1.0, da_s);
  Vector dxs = gemv_t(w_static, da_s);
  apply_mask(dxs, tr.mask_static);
  add_outer(g.embed_static, dxs, p.stat);
}

// ---------------------------------------------------------------------------
// TleNet

namespace {

struct TleTrace : Trace {
  // per visit
  std::vector<Vector> bg;      // background input vector
  std::vector<Vector> stack_d; // masked stacked latents
  std::vector<Vector> hid;     // tanh hidden (unmasked)
  std::vector<Vector> hid_d;   // masked hidden
  std::vector<Vector> mask_stack;
  std::vector<Vector> mask_hid;
};

}  // namespace

TleNet::TleNet(ModelDims d, Rng& rng) : Net(d) {
  embed_background = Matrix(d.rank, d.static_dim + d.dynamic_dim);
  embed_visit = Matrix(d.rank, d.dynamic_dim);
  w_hidden = Matrix(d.hidden, (d.tle_n + 1) * d.rank);
  b_hidden.assign(d.hidden, 0.0);
  w_out = Matrix(d.labels, d.hidden);
  b_out.assign(d.labels, 0.0);
  xavier_init(embed_background, rng);
  xavier_init(embed_visit, rng);
  xavier_init(w_hidden, rng);
  xavier_init(w_out, rng);
}

std::vector<TensorRef> TleNet::tensors() {
  return {ref("A_bg", embed_background), ref("B", embed_visit),
          ref("W_h", w_hidden),          ref("b_h", b_hidden),
          ref("W_o", w_out),             ref("b", b_out)};
}

std::unique_ptr<Net> TleNet::clone() const {
  return std::make_unique<TleNet>(*this);
}

Vector TleNet::background(const EncodedPatient& p, std::size_t t) const {
  Vector bg(dims_.static_dim + dims_.dynamic_dim, 0.0);
  for (std::size_t i = 0; i < p.stat.size(); ++i) bg[i] = p.stat[i];
  if (t > 0) {
    const double inv = 1.0 / double(t);
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t i = 0; i < dims_.dynamic_dim; ++i) {
        bg[dims_.static_dim + i] += inv * p.visits[j][i];
      }
    }
  }
  return bg;
}

std::vector<double> TleNet::forward(const EncodedPatient& p,
                                    std::unique_ptr<Trace>& trace,
                                    const DropoutCtx* dropout) const {
  if (p.visits.empty()) {
    throw std::invalid_argument("forward: patient " + p.id + " has no visits");
  }
  auto tr = std::make_unique<TleTrace>();
  const std::size_t tlen = p.visits.size();
  const std::size_t k = dims_.labels;
  const std::size_t r = dims_.rank;
  const std::size_t n = dims_.tle_n;
  tr->bg.resize(tlen);
  tr->stack_d.resize(tlen);
  tr->hid.resize(tlen);
  tr->hid_d.resize(tlen);
  tr->mask_stack.resize(tlen);
  tr->mask_hid.resize(tlen);

  // incremental running sum of visit vectors for the background aggregate
  Vector visit_sum(dims_.dynamic_dim, 0.0);
  std::vector<double> probs(tlen * k);
  for (std::size_t t = 0; t < tlen; ++t) {
    Vector bg(dims_.static_dim + dims_.dynamic_dim, 0.0);
    for (std::size_t i = 0; i < p.stat.size(); ++i) bg[i] = p.stat[i];
    if (t > 0) {
      const double inv = 1.0 / double(t);
      for (std::size_t i = 0; i < dims_.dynamic_dim; ++i) {
        bg[dims_.static_dim + i] = inv * visit_sum[i];
      }
    }
    tr->bg[t] = bg;

    Vector stack((n + 1) * r, 0.0);
    Vector e_bg = gemv(embed_background, bg);
    for (std::size_t i = 0; i < r; ++i) stack[i] = e_bg[i];
    // slot j holds the latent of visit t-j; missing history stays zero
    for (std::size_t j = 0; j < n; ++j) {
      if (t < j) break;
      Vector e = gemv(embed_visit, p.visits[t - j]);
      for (std::size_t i = 0; i < r; ++i) stack[(j + 1) * r + i] = e[i];
    }
    tr->mask_stack[t] = make_mask(stack.size(), dropout);
    apply_mask(stack, tr->mask_stack[t]);
    tr->stack_d[t] = stack;

    Vector a = gemv(w_hidden, stack);
    axpy(a, 1.0, b_hidden);
    tr->hid[t] = tanh_act(a);
    Vector hd = tr->hid[t];
    tr->mask_hid[t] = make_mask(hd.size(), dropout);
    apply_mask(hd, tr->mask_hid[t]);
    tr->hid_d[t] = hd;

    Vector z = gemv(w_out, hd);
    axpy(z, 1.0, b_out);
    for (std::size_t j = 0; j < k; ++j) {
      probs[t * k + j] = clamp_prob(sigmoid1(z[j]));
    }
    axpy(visit_sum, 1.0, p.visits[t]);
  }
  trace = std::move(tr);
  return probs;
}

void TleNet::backward(const EncodedPatient& p, const Trace& trace,
                      const std::vector<double>& dz, Net& grad) const {
  const auto& tr = static_cast<const TleTrace&>(trace);
  auto& g = static_cast<TleNet&>(grad);
  const std::size_t tlen = p.visits.size();
  const std::size_t k = dims_.labels;
  const std::size_t r = dims_.rank;
  const std::size_t n = dims_.tle_n;
  if (dz.size() != tlen * k) {
    throw std::invalid_argument("backward: dz size mismatch");
  }

  for (std::size_t t = 0; t < tlen; ++t) {
    Vector dzt(dz.begin() + t * k, dz.begin() + (t + 1) * k);
    add_outer(g.w_out, dzt, tr.hid_d[t]);
    axpy(g.b_out, 1.0, dzt);
    Vector dhid = gemv_t(w_out, dzt);
    apply_mask(dhid, tr.mask_hid[t]);
    Vector da(dhid.size());
    for (std::size_t i = 0; i < da.size(); ++i) {
      da[i] = dhid[i] * (1.0 - tr.hid[t][i] * tr.hid[t][i]);
    }
    add_outer(g.w_hidden, da, tr.stack_d[t]);
    axpy(g.b_hidden, 1.0, da);
    Vector dstack = gemv_t(w_hidden, da);
    apply_mask(dstack, tr.mask_stack[t]);

    Vector de_bg(dstack.begin(), dstack.begin() + r);
    add_outer(g.embed_background, de_bg, tr.bg[t]);
    for (std::size_t j = 0; j < n; ++j) {
      if (t < j) break;
      Vector de(dstack.begin() + (j + 1) * r, dstack.begin() + (j + 2) * r);
      add_outer(g.embed_visit, de, p.visits[t - j]);
    }
  }
}

// ---------------------------------------------------------------------------
// LogRegNet

namespace {

struct LogRegTrace : Trace {
  std::vector<Vector> feats;
};

}  // namespace

LogRegNet::LogRegNet(ModelDims d, Rng& rng) : Net(d) {
  w = Matrix(d.labels, d.static_dim + 2 * d.dynamic_dim);
  b.assign(d.labels, 0.0);
  xavier_init(w, rng);
}

std::vector<TensorRef> LogRegNet::tensors() {
  return {ref("W", w), ref("b", b)};
}

std::unique_ptr<Net> LogRegNet::clone() const {
  return std::make_unique<LogRegNet>(*this);
}

Vector LogRegNet::features(const EncodedPatient& p, std::size_t t) const {
  const std::size_t s = dims_.static_dim;
  const std::size_t d = dims_.dynamic_dim;
  Vector f(s + 2 * d, 0.0);
  for (std::size_t i = 0; i < p.stat.size(); ++i) f[i] = p.stat[i];
  for (std::size_t i = 0; i < d; ++i) f[s + i] = p.visits[t][i];
  if (t > 0) {
    const double inv = 1.0 / double(t);
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t i = 0; i < d; ++i) f[s + d + i] += inv * p.visits[j][i];
    }
  }
  return f;
}

std::vector<double> LogRegNet::forward(const EncodedPatient& p,
                                       std::unique_ptr<Trace>& trace,
                                       const DropoutCtx*) const {
  if (p.visits.empty()) {
    throw std::invalid_argument("forward: patient " + p.id + " has no visits");
  }
  auto tr = std::make_unique<LogRegTrace>();
  const std::size_t tlen = p.visits.size();
  const std::size_t k = dims_.labels;
  tr->feats.resize(tlen);
  std::vector<double> probs(tlen * k);
  for (std::size_t t = 0; t < tlen; ++t) {
    tr->feats[t] = features(p, t);
    Vector z = gemv(w, tr->feats[t]);
    axpy(z, 1.0, b);
    for (std::size_t j = 0; j < k; ++j) {
      probs[t * k + j] = clamp_prob(sigmoid1(z[j]));
    }
  }
  trace = std::move(tr);
  return probs;
}

void LogRegNet::backward(const EncodedPatient& p, const Trace& trace,
                         const std::vector<double>& dz, Net& grad) const {
  const auto& tr = static_cast<const LogRegTrace&>(trace);
  auto& g = static_cast<LogRegNet&>(grad);
  const std::size_t k = dims_.labels;
  for (std::size_t t = 0; t < p.visits.size(); ++t) {
    Vector dzt(dz.begin() + t * k, dz.begin() + (t + 1) * k);
    add_outer(g.w, dzt, tr.feats[t]);
    axpy(g.b, 1.0, dzt);
  }
}

// ---------------------------------------------------------------------------
// StaticOnlyNet

namespace {

struct StaticOnlyTrace : Trace {
  Vector e_d;
  Vector hid;
  Vector hid_d;
  Vector mask_e, mask_h;
};

}  // namespace

StaticOnlyNet::StaticOnlyNet(ModelDims d, Rng& rng) : Net(d) {
  embed_static = Matrix(d.rank, d.static_dim);
  w_hidden = Matrix(d.hidden, d.rank);
  b_hidden.assign(d.hidden, 0.0);
  w_out = Matrix(d.labels, d.hidden);
  b_out.assign(d.labels, 0.0);
  xavier_init(embed_static, rng);
  xavier_init(w_hidden, rng);
  xavier_init(w_out, rng);
}

std::vector<TensorRef> StaticOnlyNet::tensors() {
  return {ref("A", embed_static), ref("W_h", w_hidden), ref("b_h", b_hidden),
          ref("W_o", w_out), ref("b", b_out)};
}

std::unique_ptr<Net> StaticOnlyNet::clone() const {
  return std::make_unique<StaticOnlyNet>(*this);
}

std::vector<double> StaticOnlyNet::forward(const EncodedPatient& p,
                                           std::unique_ptr<Trace>& trace,
                                           const DropoutCtx* dropout) const {
  if (p.visits.empty()) {
    throw std::invalid_argument("forward: patient " + p.id + " has no visits");
  }
  auto tr = std::make_unique<StaticOnlyTrace>();
  Vector e = gemv(embed_static, p.stat);
  tr->mask_e = make_mask(e.size(), dropout);
  apply_mask(e, tr->mask_e);
  tr->e_d = e;
  Vector a = gemv(w_hidden, e);
  axpy(a, 1.0, b_hidden);
  tr->hid = tanh_act(a);
  Vector hd = tr->hid;
  tr->mask_h = make_mask(hd.size(), dropout);
  apply_mask(hd, tr->mask_h);
  tr->hid_d = hd;
  Vector z = gemv(w_out, hd);
  axpy(z, 1.0, b_out);

  const std::size_t k = dims_.labels;
  std::vector<double> row(k);
  for (std::size_t j = 0; j < k; ++j) row[j] = clamp_prob(sigmoid1(z[j]));
  std::vector<double> probs(p.visits.size() * k);
  for (std::size_t t = 0; t < p.visits.size(); ++t) {
    for (std::size_t j = 0; j < k; ++j) probs[t * k + j] = row[j];
  }
  trace = std::move(tr);
  return probs;
}

void StaticOnlyNet::backward(const EncodedPatient& p, const Trace& trace,
                             const std::vector<double>& dz, Net& grad) const {
  const auto& tr = static_cast<const StaticOnlyTrace&>(trace);
  auto& g = static_cast<StaticOnlyNet&>(grad);
  const std::size_t k = dims_.labels;
  // one shared prediction: per-visit output gradients sum
  Vector dzsum(k, 0.0);
  for (std::size_t t = 0; t < p.visits.size(); ++t) {
    for (std::size_t j = 0; j < k; ++j) dzsum[j] += dz[t * k + j];
  }
  add_outer(g.w_out, dzsum, tr.hid_d);
  axpy(g.b_out, 1.0, dzsum);
  Vector dhid = gemv_t(w_out, dzsum);
  apply_mask(dhid, tr.mask_h);
  Vector da(dhid.size());
  for (std::size_t i = 0; i < da.size(); ++i) {
    da[i] = dhid[i] * (1.0 - tr.hid[i] * tr.hid[i]);
  }
  add_outer(g.w_hidden, da, tr.e_d);
  axpy(g.b_hidden, 1.0, da);
  Vector de = gemv_t(w_hidden, da);
  apply_mask(de, tr.mask_e);
  add_outer(g.embed_static, de, p.stat);
}

// ---------------------------------------------------------------------------
// RandomNet

RandomNet::RandomNet(ModelDims d, std::uint64_t s) : Net(d), seed(s) {}

std::unique_ptr<Net> RandomNet::clone() const {
  return std::make_unique<RandomNet>(*this);
}

std::vector<double> RandomNet::forward(const EncodedPatient& p,
                                       std::unique_ptr<Trace>& trace,
                                       const DropoutCtx*) const {
  trace = std::make_unique<Trace>();
  Rng r = Rng(seed).substream(p.id);
  std::vector<double> probs(p.visits.size() * dims_.labels);
  for (double& v : probs) v = r.uniform(kProbEps, 1.0 - kProbEps);
  return probs;
}

std::unique_ptr<Net> make_net(Arch arch, const ModelDims& dims, Rng& rng,
                              std::uint64_t random_seed) {
  switch (arch) {
    case Arch::Rnn: return std::make_unique<FusionNet>(CellKind::Rnn, dims, rng);
    case Arch::Lstm:
      return std::make_unique<FusionNet>(CellKind::Lstm, dims, rng);
    case Arch::Gru: return std::make_unique<FusionNet>(CellKind::Gru, dims, rng);
    case Arch::Tle: return std::make_unique<TleNet>(dims, rng);
    case Arch::LogReg: return std::make_unique<LogRegNet>(dims, rng);
    case Arch::StaticOnly: return std::make_unique<StaticOnlyNet>(dims, rng);
    case Arch::Random: return std::make_unique<RandomNet>(dims, random_seed);
  }
  throw std::invalid_argument("make_net: unknown architecture");
}

}  // namespace sdrnn
