#pragma once

// Thin FFTW wrapper. Plans are created once per (size, direction) and shared;
// FFTW's planner is not thread-safe, execution through the new-array API is.

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace talbot {

using Complex = std::complex<double>;

namespace detail {

class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  fftw_plan plan(int n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<Complex> scratch_in(static_cast<std::size_t>(n));
    std::vector<Complex> scratch_out(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(scratch_in.data()),
                                   reinterpret_cast<fftw_complex*>(scratch_out.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  FftPlanCache(const FftPlanCache&) = delete;
  FftPlanCache& operator=(const FftPlanCache&) = delete;

 private:
  FftPlanCache() = default;
  ~FftPlanCache() {
    for (auto& [key, p] : plans_) fftw_destroy_plan(p);
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline void execute(std::span<const Complex> in, std::span<Complex> out, int sign) {
  const int n = static_cast<int>(in.size());
  fftw_plan p = FftPlanCache::instance().plan(n, sign);
  // FFTW never writes through `in` for out-of-place c2c transforms.
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace detail

/// out[m] = sum_n in[n] exp(-2 pi i n m / M), unnormalized.
inline std::vector<Complex> fft_forward(std::span<const Complex> in) {
  std::vector<Complex> out(in.size());
  detail::execute(in, out, FFTW_FORWARD);
  return out;
}

/// out[m] = sum_n in[n] exp(+2 pi i n m / M), unnormalized.
inline std::vector<Complex> fft_backward(std::span<const Complex> in) {
  std::vector<Complex> out(in.size());
  detail::execute(in, out, FFTW_BACKWARD);
  return out;
}

}  // namespace talbot
