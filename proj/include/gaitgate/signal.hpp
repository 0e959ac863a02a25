#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gaitgate {

// One accelerometer reading. Time in seconds, acceleration in g.
struct AccelSample {
  double t = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  double az = 0.0;
};

struct AccelSeries {
  std::vector<AccelSample> samples;
  double fs = 100.0;

  double duration_sec() const {
    return static_cast<double>(samples.size()) / fs;
  }
};

// Throws kInvalidArgument unless the series is non-empty, finite, strictly
// increasing in time, and its median sample gap is within 1% of 1/fs.
void validate_series(const AccelSeries& series);

struct MagnitudeSeries {
  std::vector<double> values;
  double fs = 100.0;
  // Offset of values[0] within the series the window was cut from.
  std::size_t start_index = 0;

  std::size_t size() const { return values.size(); }
  double start_sec() const { return static_cast<double>(start_index) / fs; }
  double end_sec() const {
    return static_cast<double>(start_index + values.size()) / fs;
  }
};

struct StftConfig {
  std::size_t frame_len = 128;
  std::size_t hop = 64;
  std::size_t fft_len = 128;
  double db_floor_eps = 1e-12;

  std::size_t freq_bins() const { return fft_len / 2 + 1; }
  // Frames produced for a window of n samples (0 if n < frame_len).
  std::size_t frames_for(std::size_t n) const {
    return n < frame_len ? 0 : (n - frame_len) / hop + 1;
  }
  void validate() const;
};

// Row-major F x T grid. `freq_bins` rows, `frames` columns.
template <typename T>
struct Grid {
  std::size_t freq_bins = 0;
  std::size_t frames = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(std::size_t f, std::size_t t, T fill = T{})
      : freq_bins(f), frames(t), data(f * t, fill) {}

  T& at(std::size_t f, std::size_t t) { return data[f * frames + t]; }
  const T& at(std::size_t f, std::size_t t) const {
    return data[f * frames + t];
  }
};

using PowerSpectrum = Grid<double>;
// dB values; the encoder input.
using Spectrogram = Grid<double>;

struct AugmentConfig {
  double dropout_p = 0.1;
  std::uint64_t rng_seed = 0;
};

MagnitudeSeries magnitude(const AccelSeries& series);

// Windows of round(window_sec * fs) samples at stride
// round((1 - overlap_frac) * window_sec * fs). Trailing partial windows are
// dropped; a series shorter than one window yields no windows.
std::vector<MagnitudeSeries> slice_windows(const MagnitudeSeries& series,
                                           double window_sec,
                                           double overlap_frac);

// Symmetric Hann: w[k] = 0.5 (1 - cos(2 pi k / (n - 1))).
std::vector<double> hann_window(std::size_t n);

PowerSpectrum stft_power(std::span<const double> window, const StftConfig& cfg);
inline PowerSpectrum stft_power(const MagnitudeSeries& window,
                                const StftConfig& cfg) {
  return stft_power(window.values, cfg);
}

Spectrogram power_to_db(const PowerSpectrum& power, double eps);

// Writes literal 0.0 into each cell independently with probability p.
Spectrogram pixel_dropout(const Spectrogram& spec, const AugmentConfig& cfg);

// magnitude window -> dB spectrogram with the given STFT settings.
Spectrogram window_spectrogram(std::span<const double> window,
                               const StftConfig& cfg);

}  // namespace gaitgate
