#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace shocklab {

/// Dense polynomial c[0] + c[1] u + ... + c[d] u^d.
///
/// Fluxes are stored this way so that increments f(u + d) - f(u) can be
/// evaluated through the Taylor shift without cancellation when |d| is many
/// orders of magnitude below |u|.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coefficients) : c_(std::move(coefficients)) {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
    if (c_.empty()) c_.push_back(0.0);
  }

  const std::vector<double>& coefficients() const noexcept { return c_; }
  std::size_t degree() const noexcept { return c_.size() - 1; }

  double operator()(double u) const noexcept {
    double acc = 0.0;
    for (std::size_t i = c_.size(); i-- > 0;) acc = acc * u + c_[i];
    return acc;
  }

  /// k-th derivative evaluated at u.
  double derivative(double u, unsigned k = 1) const noexcept {
    if (k > degree()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = c_.size(); i-- > k;) {
      double falling = 1.0;
      for (unsigned m = 0; m < k; ++m) falling *= static_cast<double>(i - m);
      acc = acc * u + falling * c_[i];
    }
    return acc;
  }

  /// Coefficients b_k = f^(k)(u0)/k! so that f(u0 + d) = sum_k b_k d^k.
  std::vector<double> taylor_shift(double u0) const {
    std::vector<double> b = c_;
    const std::size_t n = b.size();
    for (std::size_t k = 0; k + 1 < n; ++k) {
      for (std::size_t i = n - 1; i > k; --i) b[i - 1] += u0 * b[i];
    }
    return b;
  }

  /// Allocation-free variant of taylor_shift; `out` holds degree()+1 entries.
  void taylor_shift_into(double u0, double* out) const noexcept {
    const std::size_t n = c_.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = c_[i];
    for (std::size_t k = 0; k + 1 < n; ++k)
      for (std::size_t i = n - 1; i > k; --i) out[i - 1] += u0 * out[i];
  }

  /// f(u0 + d) - f(u0) evaluated from the Taylor coefficients.
  double increment(double u0, double d) const {
    const std::vector<double> b = taylor_shift(u0);
    double acc = 0.0;
    for (std::size_t k = b.size(); k-- > 1;) acc = (acc + b[k]) * d;
    return acc;
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  std::vector<double> c_{0.0};
};

}  // namespace shocklab
