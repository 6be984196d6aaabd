#include "semv2x/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "semv2x/errors.hpp"

namespace semv2x {

std::vector<double> vec_mat(std::span<const double> x, const Matrix& m) {
  if (x.size() != m.rows()) throw DomainError("vec_mat: shape mismatch");
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto r = m.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += xi * r[j];
  }
  return out;
}

std::vector<double> mat_vec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) throw DomainError("mat_vec: shape mismatch");
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), x);
  return out;
}

void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v, double alpha) {
  if (u.size() != m.rows() || v.size() != m.cols()) throw DomainError("add_outer: shape mismatch");
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ui = alpha * u[i];
    auto r = m.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) r[j] += ui * v[j];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax of an empty vector");
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace semv2x
