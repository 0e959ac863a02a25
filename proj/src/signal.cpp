#include "gaitgate/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "gaitgate/error.hpp"
#include "gaitgate/rng.hpp"

namespace gaitgate {

namespace {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

// Power of the first n/2+1 bins of the length-n DFT of `frame`.
void dft_power(const std::vector<double>& frame, std::size_t fft_len,
               double* out_bins, std::size_t stride) {
  const std::size_t bins = fft_len / 2 + 1;
  if (std::has_single_bit(fft_len)) {
    std::vector<std::complex<double>> buf(fft_len);
    for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
    fft_radix2(buf);
    for (std::size_t k = 0; k < bins; ++k) out_bins[k * stride] = std::norm(buf[k]);
    return;
  }
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t n = 0; n < frame.size(); ++n) {
      // index product reduced mod fft_len keeps the angle small
      const auto idx = (k * n) % fft_len;
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(idx) /
                         static_cast<double>(fft_len);
      re += frame[n] * std::cos(ang);
      im += frame[n] * std::sin(ang);
    }
    out_bins[k * stride] = re * re + im * im;
  }
}

}  // namespace

void validate_series(const AccelSeries& series) {
  require(!series.samples.empty(), "empty input");
  require(series.fs > 0.0 && std::isfinite(series.fs),
          "sample rate must be positive and finite");
  std::vector<double> gaps;
  gaps.reserve(series.samples.size());
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const auto& s = series.samples[i];
    require(std::isfinite(s.t) && std::isfinite(s.ax) && std::isfinite(s.ay) &&
                std::isfinite(s.az),
            "non-finite sample at index " + std::to_string(i));
    if (i > 0) {
      const double gap = s.t - series.samples[i - 1].t;
      require(gap > 0.0,
              "timestamps not strictly increasing at index " + std::to_string(i));
      gaps.push_back(gap);
    }
  }
  if (gaps.empty()) return;
  auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  const double expected = 1.0 / series.fs;
  require(std::abs(*mid - expected) < 0.01 * expected,
          "median sample gap " + std::to_string(*mid) +
              " s deviates from 1/fs by more than 1%");
}

void StftConfig::validate() const {
  require(hop > 0 && hop <= frame_len && frame_len <= fft_len,
          "stft config requires 0 < hop <= frame_len <= fft_len");
  require(db_floor_eps > 0.0, "stft config requires db_floor_eps > 0");
}

MagnitudeSeries magnitude(const AccelSeries& series) {
  require(!series.samples.empty(), "empty input");
  MagnitudeSeries out;
  out.fs = series.fs;
  out.values.reserve(series.samples.size());
  for (const auto& s : series.samples) {
    out.values.push_back(std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az));
  }
  return out;
}

std::vector<MagnitudeSeries> slice_windows(const MagnitudeSeries& series,
                                           double window_sec,
                                           double overlap_frac) {
  require(window_sec > 0.0, "window_sec must be positive");
  require(overlap_frac >= 0.0 && overlap_frac < 1.0,
          "overlap_frac must be in [0, 1)");
  const auto len = static_cast<std::size_t>(std::llround(window_sec * series.fs));
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround((1.0 - overlap_frac) * window_sec * series.fs)));
  std::vector<MagnitudeSeries> out;
  if (len == 0 || series.values.size() < len) return out;
  for (std::size_t start = 0; start + len <= series.values.size(); start += stride) {
    MagnitudeSeries w;
    w.fs = series.fs;
    w.start_index = series.start_index + start;
    w.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start),
                    series.values.begin() + static_cast<std::ptrdiff_t>(start + len));
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / denom));
  }
  return w;
}

PowerSpectrum stft_power(std::span<const double> window, const StftConfig& cfg) {
  cfg.validate();
  require(window.size() >= cfg.frame_len,
          "window of " + std::to_string(window.size()) +
              " samples is shorter than one STFT frame (" +
              std::to_string(cfg.frame_len) + ")");
  const std::size_t frames = cfg.frames_for(window.size());
  PowerSpectrum out(cfg.freq_bins(), frames);
  const auto hann = hann_window(cfg.frame_len);
  std::vector<double> frame(cfg.frame_len);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t off = f * cfg.hop;
    for (std::size_t i = 0; i < cfg.frame_len; ++i) frame[i] = window[off + i] * hann[i];
    dft_power(frame, cfg.fft_len, &out.data[f], frames);
  }
  return out;
}

Spectrogram power_to_db(const PowerSpectrum& power, double eps) {
  require(eps > 0.0, "db floor eps must be positive");
  Spectrogram out(power.freq_bins, power.frames);
  for (std::size_t i = 0; i < power.data.size(); ++i) {
    out.data[i] = 10.0 * std::log10(std::max(power.data[i], eps));
  }
  return out;
}

Spectrogram pixel_dropout(const Spectrogram& spec, const AugmentConfig& cfg) {
  require(cfg.dropout_p >= 0.0 && cfg.dropout_p <= 1.0,
          "dropout_p must be in [0, 1]");
  Spectrogram out = spec;
  if (cfg.dropout_p == 0.0) return out;
  Rng rng(cfg.rng_seed);
  for (auto& v : out.data) {
    // one draw per cell regardless of p keeps the stream layout fixed
    if (rng.uniform() < cfg.dropout_p) v = 0.0;
  }
  return out;
}

Spectrogram window_spectrogram(std::span<const double> window,
                               const StftConfig& cfg) {
  return power_to_db(stft_power(window, cfg), cfg.db_floor_eps);
}

}  // namespace gaitgate
