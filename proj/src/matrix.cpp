#include "gclrec/matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "gclrec/errors.hpp"

#include <atomic>
#include <iostream>

namespace gclrec {

void add_scaled(Matrix& dst, const Matrix& src, double alpha) {
  if (!dst.same_shape(src)) {
    throw std::invalid_argument("add_scaled: shape mismatch");
  }
  axpy(alpha, src.values(), dst.values());
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_difference: shape mismatch");
  }
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) {
    m = std::max(m, std::abs(av[k] - bv[k]));
  }
  return m;
}

bool all_finite(const Matrix& m) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {
std::atomic<bool> g_warnings_enabled{true};
}

void warn(const std::string& message) {
  if (g_warnings_enabled.load()) std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled.store(enabled); }

}  // namespace gclrec
