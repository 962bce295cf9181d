#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "msfa/error.hpp"
#include "msfa/feature_stack.hpp"
#include "msfa/filters/fft.hpp"
#include "msfa/raster.hpp"

namespace msfa::filters {

struct WstParams {
  int J = 2; // number of dyadic scales; output is decimated by 2^J
  int L = 8; // orientations over [0, pi)

  void validate() const {
    if (J < 1) throw Error(Errc::invalid_argument, "wst J must be >= 1");
    if (L < 1) throw Error(Errc::invalid_argument, "wst L must be >= 1");
    if (J > 12) throw Error(Errc::invalid_argument, "wst J must be <= 12");
  }
};

// Order-2 path count: one low-pass, J*L first-order, L^2 * J(J-1)/2 second.
constexpr std::size_t wst_channel_count(int J, int L) {
  const auto j = static_cast<std::size_t>(J), l = static_cast<std::size_t>(L);
  return 1 + j * l + l * l * j * (j - 1) / 2;
}

// Fourier-domain Morlet wavelets psi_{j,l} and Gaussian low-pass phi on a
// rows x cols periodic grid. Filters are real in the Fourier domain.
class WstFilterBank {
 public:
  WstFilterBank(int J, int L, int rows, int cols)
      : J_(J), L_(L), rows_(rows), cols_(cols), fft_(rows, cols) {
    const double phi_sigma = 0.8 * std::pow(2.0, J - 1);
    phi_ = fourier(gabor(phi_sigma, 0.0, 0.0, 1.0));
    // Normalise the low-pass to unit DC gain.
    const double dc = phi_[0];
    for (double& v : phi_) v /= dc;

    psi_.resize(static_cast<std::size_t>(J) * L);
    for (int j = 0; j < J; ++j) {
      for (int l = 0; l < L; ++l) {
        const double sigma = 0.8 * std::pow(2.0, j);
        const double theta = (static_cast<int>(L - L / 2 - 1) - l) * std::numbers::pi / L;
        const double xi = 3.0 / 4.0 * std::numbers::pi / std::pow(2.0, j);
        psi_[index(j, l)] = fourier(morlet(sigma, theta, xi, 4.0 / L));
      }
    }
    normalise_littlewood_paley();
  }

  int J() const noexcept { return J_; }
  int L() const noexcept { return L_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  const Fft2d& fft() const noexcept { return fft_; }
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<double>& psi(int j, int l) const { return psi_.at(index(j, l)); }

  // max over frequencies of |phi|^2 + 1/2 sum |psi(w)|^2 + |psi(-w)|^2.
  double littlewood_paley_max() const {
    const auto lp = littlewood_paley();
    double mx = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i) mx = std::max(mx, phi_[i] * phi_[i] + lp[i]);
    return mx;
  }

 private:
  using Grid = std::vector<std::complex<double>>;

  std::size_t index(int j, int l) const { return static_cast<std::size_t>(j) * L_ + l; }

  // Periodised anisotropic Gabor filter sampled on the grid.
  Grid gabor(double sigma, double theta, double xi, double slant) const {
    const double c = std::cos(theta), s = std::sin(theta);
    // curv = R diag(1, slant^2) R^T / (2 sigma^2)
    const double d = slant * slant;
    const double c00 = (c * c + d * s * s) / (2 * sigma * sigma);
    const double c01 = (c * s - d * s * c) / (2 * sigma * sigma);
    const double c11 = (s * s + d * c * c) / (2 * sigma * sigma);
    Grid g(static_cast<std::size_t>(rows_) * cols_);
    for (int u = 0; u < rows_; ++u) {
      for (int v = 0; v < cols_; ++v) {
        std::complex<double> acc = 0.0;
        for (int pu = -2; pu <= 2; ++pu) {
          for (int pv = -2; pv <= 2; ++pv) {
            const double x = u + pu * rows_;
            const double y = v + pv * cols_;
            const double env = -(c00 * x * x + 2.0 * c01 * x * y + c11 * y * y);
            const double phase = xi * (x * c + y * s);
            acc += std::exp(std::complex<double>(env, phase));
          }
        }
        g[static_cast<std::size_t>(u) * cols_ + v] =
            acc / (2.0 * std::numbers::pi * sigma * sigma / slant);
      }
    }
    return g;
  }

  // Gabor minus a scaled Gaussian envelope so that the filter has zero mean.
  Grid morlet(double sigma, double theta, double xi, double slant) const {
    Grid wave = gabor(sigma, theta, xi, slant);
    const Grid env = gabor(sigma, theta, 0.0, slant);
    std::complex<double> sw = 0.0, se = 0.0;
    for (std::size_t i = 0; i < wave.size(); ++i) {
      sw += wave[i];
      se += env[i];
    }
    const std::complex<double> k = sw / se;
    for (std::size_t i = 0; i < wave.size(); ++i) wave[i] -= k * env[i];
    return wave;
  }

  std::vector<double> fourier(Grid g) const {
    fft_.forward(g);
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i].real();
    return out;
  }

  std::size_t negated(std::size_t i) const {
    const int u = static_cast<int>(i / static_cast<std::size_t>(cols_));
    const int v = static_cast<int>(i % static_cast<std::size_t>(cols_));
    return static_cast<std::size_t>((rows_ - u) % rows_) * cols_ + (cols_ - v) % cols_;
  }

  std::vector<double> littlewood_paley() const {
    std::vector<double> lp(phi_.size(), 0.0);
    for (const auto& p : psi_) {
      for (std::size_t i = 0; i < lp.size(); ++i) {
        const double a = p[i], b = p[negated(i)];
        lp[i] += 0.5 * (a * a + b * b);
      }
    }
    return lp;
  }

  // Rescales the wavelets so |phi|^2 + sum |psi|^2 <= 1 at every frequency.
  void normalise_littlewood_paley() {
    const auto lp = littlewood_paley();
    double peak = 0.0;
    for (double v : lp) peak = std::max(peak, v);
    double scale2 = 1.0;
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (lp[i] <= 1e-12 * peak) continue;
      scale2 = std::min(scale2, std::max(0.0, 1.0 - phi_[i] * phi_[i]) / lp[i]);
    }
    const double scale = std::sqrt(scale2);
    for (auto& p : psi_) {
      for (double& v : p) v *= scale;
    }
  }

  int J_, L_, rows_, cols_;
  Fft2d fft_;
  std::vector<double> phi_;
  std::vector<std::vector<double>> psi_;
};

// Filter banks are built once per (J, L, padded size) and shared read-only.
inline std::shared_ptr<const WstFilterBank> wst_filter_bank(int J, int L, int rows, int cols) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int, int>, std::shared_ptr<const WstFilterBank>> cache;
  const auto key = std::make_tuple(J, L, rows, cols);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto bank = std::make_shared<const WstFilterBank>(J, L, rows, cols);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(bank)).first->second;
}

// Second-order wavelet scattering transform. The image is reflect-padded to a
// multiple of 2^J plus a 2^J margin on every side. Each path is computed at
// full resolution, low-passed by phi and decimated by 2^J, giving channels of
// size ceil(w / 2^J) x ceil(h / 2^J). Paths with j1 < j2 only.
inline FeatureStack wst(const Raster& r, const WstParams& p = {}) {
  p.validate();
  const int step = 1 << p.J;
  const int out_w = (r.width() + step - 1) / step;
  const int out_h = (r.height() + step - 1) / step;
  const Raster padded = pad_reflect(r, step, step, out_w * step - r.width() + step,
                                    out_h * step - r.height() + step);
  const int rows = padded.height(), cols = padded.width();
  const auto bank = wst_filter_bank(p.J, p.L, rows, cols);
  const Fft2d& fft = bank->fft();
  const std::size_t n = static_cast<std::size_t>(rows) * cols;

  using Buffer = Fft2d::Buffer;
  auto multiply = [n](const Buffer& spectrum, const std::vector<double>& filter) {
    Buffer out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = spectrum[i] * filter[i];
    return out;
  };
  // |ifft(spectrum * filter)|, returned as a spectrum ready for the next layer.
  auto modulus_spectrum = [&](const Buffer& spectrum, const std::vector<double>& filter) {
    Buffer u = multiply(spectrum, filter);
    fft.inverse(u);
    for (auto& v : u) v = std::abs(v);
    fft.forward(u);
    return u;
  };
  auto lowpass_channel = [&](const Buffer& spectrum) {
    Buffer s = multiply(spectrum, bank->phi());
    fft.inverse(s);
    std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        const std::size_t src = static_cast<std::size_t>((y + 1) * step) * cols + (x + 1) * step;
        out[static_cast<std::size_t>(y) * out_w + x] = s[src].real();
      }
    }
    return Raster(out_w, out_h, std::move(out), r.bit_depth_origin());
  };

  Buffer x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = padded.values()[i];
  fft.forward(x);

  FeatureStack out;
  out.push_back("S0", lowpass_channel(x));

  std::vector<Buffer> first(static_cast<std::size_t>(p.J) * p.L);
  for (int j1 = 0; j1 < p.J; ++j1) {
    for (int l1 = 0; l1 < p.L; ++l1) {
      Buffer& u1 = first[static_cast<std::size_t>(j1) * p.L + l1];
      u1 = modulus_spectrum(x, bank->psi(j1, l1));
      out.push_back("S1_j" + std::to_string(j1) + "_t" + std::to_string(l1), lowpass_channel(u1));
    }
  }
  for (int j1 = 0; j1 < p.J; ++j1) {
    for (int l1 = 0; l1 < p.L; ++l1) {
      const Buffer& u1 = first[static_cast<std::size_t>(j1) * p.L + l1];
      for (int j2 = j1 + 1; j2 < p.J; ++j2) {
        for (int l2 = 0; l2 < p.L; ++l2) {
          out.push_back("S2_j" + std::to_string(j1) + "_t" + std::to_string(l1) + "_j" +
                            std::to_string(j2) + "_t" + std::to_string(l2),
                        lowpass_channel(modulus_spectrum(u1, bank->psi(j2, l2))));
        }
      }
    }
  }
  return out;
}

}  // namespace msfa::filters
