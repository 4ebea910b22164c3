#include "sdrnn/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace sdrnn {

Vector gemv(const Matrix& w, const Vector& x) {
  if (w.cols != x.size()) {
    throw std::invalid_argument("gemv: shape mismatch, W is " +
                                std::to_string(w.rows) + "x" +
                                std::to_string(w.cols) + ", x has length " +
                                std::to_string(x.size()));
  }
  Vector y(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.a.data() + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

Vector gemv_t(const Matrix& w, const Vector& x) {
  if (w.rows != x.size()) {
    throw std::invalid_argument("gemv_t: shape mismatch, W is " +
                                std::to_string(w.rows) + "x" +
                                std::to_string(w.cols) + ", x has length " +
                                std::to_string(x.size()));
  }
  Vector y(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.a.data() + r * w.cols;
    const double xr = x[r];
    for (std::size_t c = 0; c < w.cols; ++c) y[c] += row[c] * xr;
  }
  return y;
}

void add_outer(Matrix& g, const Vector& u, const Vector& v) {
  if (g.rows != u.size() || g.cols != v.size()) {
    throw std::invalid_argument("add_outer: shape mismatch, G is " +
                                std::to_string(g.rows) + "x" +
                                std::to_string(g.cols) + ", u " +
                                std::to_string(u.size()) + ", v " +
                                std::to_string(v.size()));
  }
  for (std::size_t r = 0; r < g.rows; ++r) {
    double* row = g.a.data() + r * g.cols;
    const double ur = u[r];
    for (std::size_t c = 0; c < g.cols; ++c) row[c] += ur * v[c];
  }
}

void axpy(Vector& y, double alpha, const Vector& x) {
  if (y.size() != x.size()) {
    throw std::invalid_argument("axpy: length mismatch " +
                                std::to_string(y.size()) + " vs " +
                                std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

double sigmoid1(double x) {
  if (x > 40.0) x = 40.0;
  if (x < -40.0) x = -40.0;
  return 1.0 / (1.0 + std::exp(-x));
}

Vector sigmoid(const Vector& x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid1(x[i]);
  return y;
}

double tanh1(double x) {
  if (x > 40.0) x = 40.0;
  if (x < -40.0) x = -40.0;
  return std::tanh(x);
}

Vector tanh_act(const Vector& x) {
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = tanh1(x[i]);
  return y;
}

std::uint64_t Rng::mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  return mix(key_ ^ mix(counter_++ * 0x2545f4914f6cdd1dULL));
}

double Rng::uniform() {
  // 53-bit mantissa
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller, one value per pair of uniforms
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  // rejection sampling to avoid modulo bias
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

static std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::substream(std::string_view name) const {
  return Rng(mix(key_ ^ fnv1a(name)), 0);
}

Rng Rng::substream(std::uint64_t index) const {
  return Rng(mix(key_ ^ mix(index ^ 0xa0761d6478bd642fULL)), 0);
}

bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

GradCheckResult finite_diff_check(const std::function<double()>& f,
                                  const std::vector<TensorRef>& params,
                                  const std::vector<TensorRef>& analytic,
                                  double h) {
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("finite_diff_check: tensor count mismatch");
  }
  GradCheckResult res;
  res.per_tensor.assign(params.size(), 0.0);
  for (std::size_t t = 0; t < params.size(); ++t) {
    const TensorRef& p = params[t];
    const TensorRef& g = analytic[t];
    if (p.size != g.size) {
      throw std::invalid_argument("finite_diff_check: size mismatch in " +
                                  p.name);
    }
    for (std::size_t i = 0; i < p.size; ++i) {
      const double orig = p.data[i];
      p.data[i] = orig + h;
      const double fp = f();
      p.data[i] = orig - h;
      const double fm = f();
      p.data[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::runtime_error("finite_diff_check: non-finite objective at " +
                                 p.name + "[" + std::to_string(i) + "]");
      }
      const double gfd = (fp - fm) / (2.0 * h);
      const double ga = g.data[i];
      const double denom = std::max(1e-8, std::abs(ga) + std::abs(gfd));
      const double rel = std::abs(ga - gfd) / denom;
      if (rel > res.per_tensor[t]) res.per_tensor[t] = rel;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_tensor = p.name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace sdrnn
