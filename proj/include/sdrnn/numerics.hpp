#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sdrnn {

using Vector = std::vector<double>;

// Dense row-major matrix. All storage is double precision; the
// finite-difference gradient checker depends on it.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  std::size_t size() const { return rows * cols; }
};

// y = W x. Shape mismatch is a contract violation and throws with both shapes.
Vector gemv(const Matrix& w, const Vector& x);

// y = W^T x (used throughout backprop).
Vector gemv_t(const Matrix& w, const Vector& x);

// g += u v^T
void add_outer(Matrix& g, const Vector& u, const Vector& v);

void axpy(Vector& y, double alpha, const Vector& x);

// Elementwise logistic sigmoid with the argument clamped to [-40, 40].
double sigmoid1(double x);
Vector sigmoid(const Vector& x);

double tanh1(double x);
Vector tanh_act(const Vector& x);

// Counter-based deterministic generator (algorithm id below). Equal seeds
// give equal streams; substreams are derived by hashing a name into the key.
class Rng {
 public:
  static constexpr std::string_view kAlgorithmId = "splitmix64-ctr-v1";

  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x5851f42d4c957f2dULL)) {}

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal, Box-Muller
  // integer in [0, n)
  std::uint64_t below(std::uint64_t n);

  Rng substream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  Rng(std::uint64_t key, int) : key_(key) {}
  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// A named view into one parameter tensor of a model.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
  std::vector<std::size_t> dims;
};

inline TensorRef ref(std::string name, Matrix& m) {
  return {std::move(name), m.a.data(), m.a.size(), {m.rows, m.cols}};
}
inline TensorRef ref(std::string name, Vector& v) {
  return {std::move(name), v.data(), v.size(), {v.size()}};
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  // per-tensor maxima, aligned with the input refs
  std::vector<double> per_tensor;
};

// Central finite differences of f against the analytic gradient, perturbing
// each coordinate of `params` in place. rel err per coordinate is
// |ga - gfd| / max(1e-8, |ga| + |gfd|). Throws if f is non-finite at a
// perturbed point, naming the coordinate.
GradCheckResult finite_diff_check(const std::function<double()>& f,
                                  const std::vector<TensorRef>& params,
                                  const std::vector<TensorRef>& analytic,
                                  double h = 1e-5);

bool all_finite(const Vector& v);

}  // namespace sdrnn
