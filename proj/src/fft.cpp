#include "ceq/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <numbers>

namespace ceq {

void enable_threaded_fft_planning() {
  static std::once_flag once;
  std::call_once(once, [] { fftw_make_planner_thread_safe(); });
}

Fft::Fft() { enable_threaded_fft_planning(); }

RVec angular_frequency_grid(Index n, double sample_rate) {
  RVec w(n);
  const double df = sample_rate / static_cast<double>(n);
  for (Index k = 0; k < n; ++k) {
    const Index kk = k < (n + 1) / 2 ? k : k - n;
    w(k) = 2.0 * std::numbers::pi * static_cast<double>(kk) * df;
  }
  return w;
}

}  // namespace ceq
