#pragma once

#include "ceq/types.hpp"

#include <unsupported/Eigen/FFT>

namespace ceq {

/// Eigen::FFT wrapper with unscaled forward / 1/N-scaled inverse transforms.
/// Instances cache plans and are not safe to share across threads.
class Fft {
 public:
  Fft();

  void forward(CVec& dst, const CVec& src) { engine_.fwd(dst, src); }
  void inverse(CVec& dst, const CVec& src) { engine_.inv(dst, src); }

  CVec forward(const CVec& src) {
    CVec dst(src.size());
    engine_.fwd(dst, src);
    return dst;
  }
  CVec inverse(const CVec& src) {
    CVec dst(src.size());
    engine_.inv(dst, src);
    return dst;
  }

 private:
  Eigen::FFT<double> engine_;
};

/// Angular frequency of DFT bin k (rad/s), with bins >= n/2 mapped to negative frequencies.
RVec angular_frequency_grid(Index n, double sample_rate);

/// Must be called once before FFT plans are created from several threads.
void enable_threaded_fft_planning();

}  // namespace ceq
