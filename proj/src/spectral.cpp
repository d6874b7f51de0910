#include "synthmatch/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

namespace synthmatch {

namespace {

// FFTW's planner is not thread-safe; fftw_execute_* with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// fftw_malloc gives SIMD alignment, which lets plans skip FFTW_UNALIGNED.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { fftw_free(p); }
  friend bool operator==(const FftwAllocator&, const FftwAllocator&) { return true; }
};

using RealBuffer = std::vector<double, FftwAllocator<double>>;
using ComplexBuffer = std::vector<std::complex<double>, FftwAllocator<std::complex<double>>>;

// ESTIMATE keeps the chosen algorithm, and so the rounding, identical across runs.
struct FftPlan {
  explicit FftPlan(int n) : size(n) {
    RealBuffer in(static_cast<std::size_t>(n));
    ComplexBuffer out(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void execute(double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(plan, in, reinterpret_cast<fftw_complex*>(out));
  }

  int size;
  fftw_plan plan;
};

void check_resolution(int fft_size, int hop_size, int window_size) {
  if (fft_size < 2 || hop_size < 1 || window_size < 1) throw ConfigError("STFT sizes must be positive");
  if (window_size > fft_size) {
    throw ConfigError("window_size " + std::to_string(window_size) + " exceeds fft_size " +
                      std::to_string(fft_size));
  }
}

std::size_t frame_count(std::size_t length, int hop) { return length / static_cast<std::size_t>(hop) + 1; }

// Windowed, zero-padded frame `k` of the centered signal.
void load_frame(std::span<const double> x, std::size_t k, int hop, const std::vector<double>& window,
                RealBuffer& buf) {
  const auto w = static_cast<std::ptrdiff_t>(window.size());
  const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(k) * hop - w / 2;
  const auto len = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t j0 = std::clamp<std::ptrdiff_t>(-start, 0, w);
  const std::ptrdiff_t j1 = std::clamp<std::ptrdiff_t>(len - start, j0, w);
  // Entries past the window are left alone; callers zero them once.
  double* b = buf.data();
  std::fill(b, b + j0, 0.0);
  for (std::ptrdiff_t j = j0; j < j1; ++j) b[j] = x[static_cast<std::size_t>(start + j)] * window[static_cast<std::size_t>(j)];
  std::fill(b + j1, b + w, 0.0);
}

// Four independent partial sums keep the FMA pipeline busy.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

void LossConfig::check() const {
  if (resolutions.empty()) throw ConfigError("LossConfig: no resolutions");
  for (const auto& r : resolutions) check_resolution(r.fft_size, r.hop_size, r.window_size);
  if (n_mels < 1) throw ConfigError("LossConfig: n_mels must be positive");
  if (w_sc < 0.0 || w_mag < 0.0) throw ConfigError("LossConfig: weights must be non-negative");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(int size) {
  // Periodic Hann: sums to size/2.
  std::vector<double> w(static_cast<std::size_t>(size));
  for (int n = 0; n < size; ++n) w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / size);
  return w;
}

Matrix stft_magnitude(std::span<const double> x, int fft_size, int hop_size, int window_size) {
  check_resolution(fft_size, hop_size, window_size);
  if (x.empty()) throw std::invalid_argument("stft_magnitude: empty input");
  const FftPlan plan(fft_size);
  const auto window = hann_window(window_size);
  const std::size_t bins = static_cast<std::size_t>(fft_size / 2 + 1);
  const std::size_t frames = frame_count(x.size(), hop_size);

  Matrix m{bins, frames, std::vector<double>(bins * frames)};
  RealBuffer buf(static_cast<std::size_t>(fft_size));
  ComplexBuffer spec(bins);
  for (std::size_t k = 0; k < frames; ++k) {
    load_frame(x, k, hop_size, window, buf);
    plan.execute(buf.data(), spec.data());
    for (std::size_t b = 0; b < bins; ++b) m.at(b, k) = std::abs(spec[b]);
  }
  return m;
}

std::vector<double> mel_center_frequencies(int n_mels, double f_min, double f_max) {
  const double lo = hz_to_mel(f_min), hi = hz_to_mel(f_max);
  std::vector<double> c(static_cast<std::size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m) c[static_cast<std::size_t>(m)] = mel_to_hz(lo + (hi - lo) * (m + 1) / (n_mels + 1));
  return c;
}

Matrix mel_filterbank(int n_mels, int fft_size, int sample_rate, double f_min, double f_max) {
  if (n_mels < 1 || fft_size < 2 || sample_rate <= 0) throw ConfigError("mel_filterbank: bad sizes");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= 0.5 * sample_rate)) {
    throw ConfigError("mel_filterbank: need 0 <= f_min < f_max <= sample_rate/2");
  }
  const std::size_t bins = static_cast<std::size_t>(fft_size / 2 + 1);
  const double lo = hz_to_mel(f_min), hi = hz_to_mel(f_max);
  std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (n_mels + 1));

  Matrix fb{static_cast<std::size_t>(n_mels), bins, std::vector<double>(static_cast<std::size_t>(n_mels) * bins, 0.0)};
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (std::size_t m = 0; m < fb.rows; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    bool any = false;
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = b * bin_hz;
      const double w = std::max(0.0, std::min((f - left) / (center - left), (right - f) / (right - center)));
      fb.at(m, b) = w;
      any = any || w > 0.0;
    }
    // Narrow low filters can fall between bins at small FFT sizes.
    if (!any) {
      const auto nearest = static_cast<std::size_t>(std::llround(center / bin_hz));
      fb.at(m, std::min(nearest, bins - 1)) = 1.0;
    }
  }
  return fb;
}

Matrix mel_spectrogram(std::span<const double> x, const Resolution& res, const Matrix& filterbank) {
  const Matrix mag = stft_magnitude(x, res.fft_size, res.hop_size, res.window_size);
  if (filterbank.cols != mag.rows) throw std::invalid_argument("mel_spectrogram: filterbank width mismatch");
  Matrix mel{filterbank.rows, mag.cols, std::vector<double>(filterbank.rows * mag.cols, 0.0)};
  for (std::size_t m = 0; m < filterbank.rows; ++m) {
    for (std::size_t b = 0; b < mag.rows; ++b) {
      const double w = filterbank.at(m, b);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < mag.cols; ++k) mel.at(m, k) += w * mag.at(b, k);
    }
  }
  return mel;
}

double spectral_convergence(const Matrix& target, const Matrix& pred) {
  if (target.rows != pred.rows || target.cols != pred.cols) {
    throw std::invalid_argument("spectral_convergence: shape mismatch");
  }
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    const double d = target.data[i] - pred.data[i];
    diff += d * d;
    norm += target.data[i] * target.data[i];
  }
  return std::sqrt(diff) / (std::sqrt(norm) + 1e-12);
}

double mean_abs_difference(const Matrix& target, const Matrix& pred) {
  if (target.rows != pred.rows || target.cols != pred.cols) {
    throw std::invalid_argument("mean_abs_difference: shape mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < target.data.size(); ++i) sum += std::abs(target.data[i] - pred.data[i]);
  return target.data.empty() ? 0.0 : sum / static_cast<double>(target.data.size());
}

struct MultiResolutionLoss::Plan {
  Plan(const Resolution& r, int n_mels, int sample_rate, double f_min, double f_max)
      : res(r), fft(r.fft_size), window(hann_window(r.window_size)) {
    const Matrix fb = mel_filterbank(n_mels, r.fft_size, sample_rate, f_min, f_max);
    bins = fb.cols;
    rows.resize(fb.rows);
    for (std::size_t m = 0; m < fb.rows; ++m) {
      std::size_t first = fb.cols, last = 0;
      for (std::size_t b = 0; b < fb.cols; ++b) {
        if (fb.at(m, b) > 0.0) {
          first = std::min(first, b);
          last = b + 1;
        }
      }
      rows[m].first = first;
      rows[m].weights.assign(fb.data.begin() + static_cast<std::ptrdiff_t>(m * fb.cols + first),
                             fb.data.begin() + static_cast<std::ptrdiff_t>(m * fb.cols + last));
    }
  }

  struct Row {
    std::size_t first = 0;
    std::vector<double> weights;
  };

  Resolution res;
  FftPlan fft;
  std::vector<double> window;
  std::size_t bins = 0;
  std::vector<Row> rows;
};

MultiResolutionLoss::MultiResolutionLoss(LossConfig cfg, int sample_rate) : cfg_(std::move(cfg)), sample_rate_(sample_rate) {
  cfg_.check();
  const double f_max = cfg_.f_max < 0.0 ? 0.5 * sample_rate : cfg_.f_max;
  for (const auto& r : cfg_.resolutions) {
    plans_.push_back(std::make_unique<Plan>(r, cfg_.n_mels, sample_rate, cfg_.f_min, f_max));
  }
}

MultiResolutionLoss::~MultiResolutionLoss() = default;

std::vector<Matrix> MultiResolutionLoss::analyze(std::span<const double> x) const {
  if (x.empty()) throw std::invalid_argument("analyze: empty input");
  thread_local RealBuffer buf;
  thread_local ComplexBuffer spec;
  thread_local std::vector<double> mag;

  std::vector<Matrix> out;
  out.reserve(plans_.size());
  for (const auto& p : plans_) {
    const std::size_t frames = frame_count(x.size(), p->res.hop_size);
    const std::size_t n_mels = p->rows.size();
    Matrix mel{n_mels, frames, std::vector<double>(n_mels * frames)};
    buf.assign(static_cast<std::size_t>(p->res.fft_size), 0.0);
    spec.resize(p->bins);
    mag.resize(p->bins);
    for (std::size_t k = 0; k < frames; ++k) {
      load_frame(x, k, p->res.hop_size, p->window, buf);
      p->fft.execute(buf.data(), spec.data());
      for (std::size_t b = 0; b < p->bins; ++b) {
        const double re = spec[b].real(), im = spec[b].imag();
        mag[b] = std::sqrt(re * re + im * im);
      }
      for (std::size_t m = 0; m < n_mels; ++m) {
        const auto& row = p->rows[m];
        mel.at(m, k) = dot(row.weights.data(), mag.data() + row.first, row.weights.size());
      }
    }
    out.push_back(std::move(mel));
  }
  return out;
}

std::vector<double> MultiResolutionLoss::resolution_losses(const std::vector<Matrix>& target_mels,
                                                           std::span<const double> pred) const {
  if (target_mels.size() != plans_.size()) throw std::invalid_argument("loss: resolution count mismatch");
  const auto pred_mels = analyze(pred);
  std::vector<double> out(plans_.size());
  for (std::size_t r = 0; r < plans_.size(); ++r) {
    out[r] = cfg_.w_sc * spectral_convergence(target_mels[r], pred_mels[r]) +
             cfg_.w_mag * mean_abs_difference(target_mels[r], pred_mels[r]);
  }
  return out;
}

double MultiResolutionLoss::loss(const std::vector<Matrix>& target_mels, std::span<const double> pred) const {
  const auto per = resolution_losses(target_mels, pred);
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

double MultiResolutionLoss::loss(std::span<const double> target, std::span<const double> pred) const {
  if (target.size() != pred.size()) throw std::invalid_argument("loss: length mismatch");
  return loss(analyze(target), pred);
}

double multires_loss(const AudioBuffer& target, const AudioBuffer& pred, const LossConfig& cfg) {
  if (target.samples.size() != pred.samples.size()) throw std::invalid_argument("multires_loss: length mismatch");
  if (target.sample_rate != pred.sample_rate) throw std::invalid_argument("multires_loss: sample rate mismatch");
  const MultiResolutionLoss loss(cfg, target.sample_rate);
  return loss.loss(target.samples, pred.samples);
}

}  // namespace synthmatch
