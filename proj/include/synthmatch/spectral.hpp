#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "synthmatch/synth.hpp"

namespace synthmatch {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Resolution {
  int fft_size = 2048;
  int hop_size = 256;
  int window_size = 1024;
};

struct LossConfig {
  std::vector<Resolution> resolutions{{2048, 256, 1024}, {1024, 128, 512}, {512, 64, 256}, {256, 32, 128}};
  int n_mels = 45;
  double f_min = 0.0;
  double f_max = -1.0;  // negative: sample_rate / 2
  double w_sc = 1.0;
  double w_mag = 1.0;

  void check() const;
};

/// Row-major matrix of non-negative reals.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Rows are frequency bins (fft_size/2+1), columns are frames.
Matrix stft_magnitude(std::span<const double> x, int fft_size, int hop_size, int window_size);

std::vector<double> hann_window(int size);

/// Triangular HTK-mel filters, n_mels x (fft_size/2+1).
Matrix mel_filterbank(int n_mels, int fft_size, int sample_rate, double f_min, double f_max);

/// Center frequency (Hz) of each mel filter.
std::vector<double> mel_center_frequencies(int n_mels, double f_min, double f_max);

/// n_mels x n_frames.
Matrix mel_spectrogram(std::span<const double> x, const Resolution& res, const Matrix& filterbank);

double spectral_convergence(const Matrix& target, const Matrix& pred);
double mean_abs_difference(const Matrix& target, const Matrix& pred);

/// Precomputed filterbanks and FFT plans for one (LossConfig, sample_rate).
/// Safe to share across threads; evaluation uses thread-local scratch.
class MultiResolutionLoss {
 public:
  MultiResolutionLoss(LossConfig cfg, int sample_rate);
  ~MultiResolutionLoss();
  MultiResolutionLoss(const MultiResolutionLoss&) = delete;
  MultiResolutionLoss& operator=(const MultiResolutionLoss&) = delete;

  /// Mel spectrogram per resolution.
  std::vector<Matrix> analyze(std::span<const double> x) const;

  double loss(std::span<const double> target, std::span<const double> pred) const;
  double loss(const std::vector<Matrix>& target_mels, std::span<const double> pred) const;

  /// Per-resolution loss terms; multires loss is their mean.
  std::vector<double> resolution_losses(const std::vector<Matrix>& target_mels, std::span<const double> pred) const;

  const LossConfig& config() const { return cfg_; }
  int sample_rate() const { return sample_rate_; }

 private:
  struct Plan;
  LossConfig cfg_;
  int sample_rate_;
  std::vector<std::unique_ptr<Plan>> plans_;
};

double multires_loss(const AudioBuffer& target, const AudioBuffer& pred, const LossConfig& cfg = {});

}  // namespace synthmatch
