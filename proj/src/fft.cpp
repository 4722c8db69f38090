#include "curlhom/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

namespace curlhom {
namespace {

struct PlanPair {
  fftw_plan forward;
  fftw_plan backward;
};

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

PlanPair plans_for(std::array<int, 3> n) {
  static std::map<std::array<int, 3>, PlanPair> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const std::size_t count = std::size_t(n[0]) * n[1] * n[2];
  std::vector<Complex> scratch(count);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  // FFTW_ESTIMATE keeps the chosen algorithm independent of timing noise.
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair p{fftw_plan_dft_3d(n[0], n[1], n[2], buf, buf, FFTW_FORWARD, flags),
             fftw_plan_dft_3d(n[0], n[1], n[2], buf, buf, FFTW_BACKWARD, flags)};
  cache.emplace(n, p);
  return p;
}

}  // namespace

Fft3::Fft3(std::array<int, 3> resolution) {
  const auto p = plans_for(resolution);
  forward_plan_ = p.forward;
  backward_plan_ = p.backward;
  size_ = Eigen::Index(resolution[0]) * resolution[1] * resolution[2];
}

void Fft3::forward(Complex* data) const {
  auto* d = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), d, d);
}

void Fft3::backward(Complex* data) const {
  auto* d = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(backward_plan_), d, d);
}

void Fft3::backward_normalized(Complex* data) const {
  backward(data);
  const double s = 1.0 / double(size_);
  for (Eigen::Index i = 0; i < size_; ++i) data[i] *= s;
}

}  // namespace curlhom
