#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "msfa/error.hpp"

namespace msfa::filters {

// FFTW's planner is not thread-safe; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place 2-D complex DFT of a fixed size. Plans use FFTW_ESTIMATE and
// FFTW_UNALIGNED.
class Fft2d {
 public:
  using Buffer = std::vector<std::complex<double>>;

  Fft2d(int rows, int cols) : rows_(rows), cols_(cols) {
    Buffer scratch(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    std::lock_guard lock(fftw_planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_2d(rows, cols, p, p, FFTW_FORWARD, flags);
    inverse_ = fftw_plan_dft_2d(rows, cols, p, p, FFTW_BACKWARD, flags);
    if (!forward_ || !inverse_) throw Error(Errc::invalid_argument, "fftw planning failed");
  }

  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  ~Fft2d() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  void forward(Buffer& data) const { run(forward_, data); }

  // Normalised inverse (divides by rows * cols).
  void inverse(Buffer& data) const {
    run(inverse_, data);
    const double scale = 1.0 / (static_cast<double>(rows_) * static_cast<double>(cols_));
    for (auto& v : data) v *= scale;
  }

 private:
  void run(fftw_plan plan, Buffer& data) const {
    if (data.size() != static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_)) {
      throw Error(Errc::invalid_argument, "fft buffer size does not match plan");
    }
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
  }

  int rows_;
  int cols_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace msfa::filters
