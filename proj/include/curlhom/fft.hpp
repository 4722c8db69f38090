#pragma once

#include "curlhom/grid.hpp"

#include <array>

namespace curlhom {

/// In-place 3-D complex FFT over a grid's resolution (row-major, last axis
/// fastest). Backward transforms are unnormalized. Plans are cached and
/// shared; execution is safe from concurrent workers.
class Fft3 {
 public:
  explicit Fft3(std::array<int, 3> resolution);

  void forward(Complex* data) const;
  void backward(Complex* data) const;
  /// Backward transform followed by division by the node count.
  void backward_normalized(Complex* data) const;

  Eigen::Index size() const { return size_; }

 private:
  void* forward_plan_;
  void* backward_plan_;
  Eigen::Index size_;
};

}  // namespace curlhom
