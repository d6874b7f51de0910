#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <thread>

#include "synthmatch/spectral.hpp"
#include "synthmatch/synth.hpp"

using namespace synthmatch;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> test_signal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = 0.5 * std::sin(2.0 * kPi * 523.0 * i / 44100.0) + 0.3 * std::sin(2.0 * kPi * 3100.0 * i / 44100.0) +
           0.1 * rng.uniform(-1.0, 1.0);
  }
  return x;
}

// Reference mel spectrogram: plain DFT, explicit framing, explicit triangles.
std::vector<std::vector<double>> reference_mel(const std::vector<double>& x, int fft, int hop, int win, int n_mels,
                                               double sr) {
  const std::size_t bins = fft / 2 + 1;
  const std::size_t frames = x.size() / hop + 1;
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = inv(mel(sr / 2) * i / (n_mels + 1));

  std::vector<std::vector<double>> fb(n_mels, std::vector<double>(bins, 0.0));
  for (int m = 0; m < n_mels; ++m) {
    bool any = false;
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = b * sr / fft;
      double w = 0.0;
      if (f > edges[m] && f < edges[m + 2]) {
        w = f <= edges[m + 1] ? (f - edges[m]) / (edges[m + 1] - edges[m]) : (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      }
      fb[m][b] = w;
      any = any || w > 0.0;
    }
    if (!any) fb[m][std::min<std::size_t>(bins - 1, std::llround(edges[m + 1] / (sr / fft)))] = 1.0;
  }

  std::vector<std::vector<double>> out(n_mels, std::vector<double>(frames, 0.0));
  for (std::size_t k = 0; k < frames; ++k) {
    std::vector<double> frame(fft, 0.0);
    for (int j = 0; j < win; ++j) {
      const long t = static_cast<long>(k) * hop - win / 2 + j;
      if (t >= 0 && t < static_cast<long>(x.size())) frame[j] = x[t] * (0.5 - 0.5 * std::cos(2.0 * kPi * j / win));
    }
    std::vector<double> mag(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      std::complex<double> acc = 0.0;
      for (int t = 0; t < fft; ++t) acc += frame[t] * std::polar(1.0, -2.0 * kPi * static_cast<double>((b * t) % fft) / fft);
      mag[b] = std::abs(acc);
    }
    for (int m = 0; m < n_mels; ++m) {
      for (std::size_t b = 0; b < bins; ++b) out[m][k] += fb[m][b] * mag[b];
    }
  }
  return out;
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (double d : m.data) v = std::max(v, std::abs(d));
  return v;
}

}  // namespace

TEST_CASE("HTK mel anchor") {
  const double oracle = 2595.0 * std::log10(1.0 + 1000.0 / 700.0);
  CHECK(std::abs(oracle - 1000.0) < 0.1);
  CHECK(hz_to_mel(1000.0) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(mel_to_hz(hz_to_mel(4321.0)) == doctest::Approx(4321.0).epsilon(1e-12));
}

TEST_CASE("Hann window sums to half its length") {
  for (int w : {128, 256, 512, 1024}) {
    const auto h = hann_window(w);
    CHECK(std::accumulate(h.begin(), h.end(), 0.0) == doctest::Approx(w / 2.0).epsilon(1e-12));
    CHECK(h[0] == 0.0);
    CHECK(h[w / 2] == doctest::Approx(1.0));
  }
}

TEST_CASE("STFT of silence and of a constant") {
  const std::vector<double> zeros(5000, 0.0);
  CHECK(max_abs(stft_magnitude(zeros, 512, 64, 256)) == 0.0);

  const std::vector<double> ones(5000, 1.0);
  const Matrix m = stft_magnitude(ones, 2048, 256, 1024);
  CHECK(m.rows == 1025);
  CHECK(m.cols == 5000 / 256 + 1);
  // Frame 10 lies fully inside the signal.
  CHECK(std::abs(m.at(0, 10) - 512.0) < 1e-6);
}

TEST_CASE("frame count under centering") {
  for (std::size_t len : {1UL, 255UL, 256UL, 257UL, 88200UL}) {
    const std::vector<double> x(len, 0.1);
    CHECK(stft_magnitude(x, 512, 256, 512).cols == len / 256 + 1);
  }
}

TEST_CASE("STFT matches a plain DFT") {
  const auto x = test_signal(700, 4);
  const int fft = 256, hop = 32, win = 128;
  const Matrix m = stft_magnitude(x, fft, hop, win);
  for (std::size_t k : {0UL, 5UL, 21UL}) {
    std::vector<double> frame(fft, 0.0);
    for (int j = 0; j < win; ++j) {
      const long t = static_cast<long>(k) * hop - win / 2 + j;
      if (t >= 0 && t < 700) frame[j] = x[t] * (0.5 - 0.5 * std::cos(2.0 * kPi * j / win));
    }
    for (int b = 0; b <= fft / 2; b += 7) {
      std::complex<double> acc = 0.0;
      for (int t = 0; t < fft; ++t) acc += frame[t] * std::polar(1.0, -2.0 * kPi * ((b * t) % fft) / fft);
      CHECK(m.at(b, k) == doctest::Approx(std::abs(acc)).epsilon(1e-9));
    }
  }
}

TEST_CASE("configuration errors") {
  const std::vector<double> x(100, 0.0);
  CHECK_THROWS_AS(stft_magnitude(x, 256, 64, 512), ConfigError);
  CHECK_THROWS_AS(mel_filterbank(45, 512, 44100, 100.0, 50.0), ConfigError);
  CHECK_THROWS_AS(mel_filterbank(45, 512, 44100, 0.0, 30000.0), ConfigError);
  LossConfig bad;
  bad.resolutions = {{256, 64, 512}};
  CHECK_THROWS_AS(MultiResolutionLoss(bad, 44100), ConfigError);
  CHECK_THROWS_AS(multires_loss({std::vector<double>(10)}, {std::vector<double>(11)}), std::invalid_argument);
}

TEST_CASE("filterbank well-formedness at the default resolutions") {
  const auto centers = mel_center_frequencies(45, 0.0, 22050.0);
  CHECK(std::is_sorted(centers.begin(), centers.end(), std::less_equal<>()));
  for (std::size_t i = 1; i < centers.size(); ++i) CHECK(centers[i] > centers[i - 1]);

  for (const auto& r : LossConfig{}.resolutions) {
    const Matrix fb = mel_filterbank(45, r.fft_size, 44100, 0.0, 22050.0);
    CHECK(fb.rows == 45);
    CHECK(fb.cols == static_cast<std::size_t>(r.fft_size / 2 + 1));
    for (std::size_t m = 0; m < fb.rows; ++m) {
      double row_max = 0.0;
      for (std::size_t b = 0; b < fb.cols; ++b) {
        CHECK(fb.at(m, b) >= 0.0);
        row_max = std::max(row_max, fb.at(m, b));
      }
      CHECK(row_max > 0.0);
    }
  }
}

TEST_CASE("spectral convergence identities") {
  Matrix t{2, 3, {1, 2, 3, 4, 5, 6}};
  Matrix zero{2, 3, std::vector<double>(6, 0.0)};
  Matrix twice = t;
  for (auto& v : twice.data) v *= 2.0;
  CHECK(spectral_convergence(t, t) == 0.0);
  CHECK(spectral_convergence(t, zero) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spectral_convergence(t, twice) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean_abs_difference(t, zero) == doctest::Approx(3.5));
  CHECK_THROWS(spectral_convergence(t, Matrix{3, 2, std::vector<double>(6)}));
}

TEST_CASE("multi-resolution loss against an independent reference") {
  const auto x = test_signal(2048, 9);
  const auto y = test_signal(2048, 10);
  const LossConfig cfg;
  double expected = 0.0;
  for (const auto& r : cfg.resolutions) {
    const auto mx = reference_mel(x, r.fft_size, r.hop_size, r.window_size, 45, 44100.0);
    const auto my = reference_mel(y, r.fft_size, r.hop_size, r.window_size, 45, 44100.0);
    double diff2 = 0.0, norm2 = 0.0, l1 = 0.0;
    std::size_t count = 0;
    for (std::size_t m = 0; m < mx.size(); ++m) {
      for (std::size_t k = 0; k < mx[m].size(); ++k) {
        diff2 += (mx[m][k] - my[m][k]) * (mx[m][k] - my[m][k]);
        norm2 += mx[m][k] * mx[m][k];
        l1 += std::abs(mx[m][k] - my[m][k]);
        ++count;
      }
    }
    expected += std::sqrt(diff2) / (std::sqrt(norm2) + 1e-12) + l1 / count;
  }
  expected /= 4.0;
  const double got = multires_loss({x, 44100}, {y, 44100}, cfg);
  CHECK(got == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("loss against silence is one plus the mean mel magnitude") {
  Rng rng(12);
  const AudioBuffer x = render(random_patch(rng));
  const AudioBuffer silence{std::vector<double>(x.samples.size(), 0.0), 44100};
  const LossConfig cfg;
  const MultiResolutionLoss loss(cfg, 44100);
  double expected = 0.0;
  for (const auto& r : cfg.resolutions) {
    const Matrix mel = mel_spectrogram(x.samples, r, mel_filterbank(45, r.fft_size, 44100, 0.0, 22050.0));
    expected += 1.0 + std::accumulate(mel.data.begin(), mel.data.end(), 0.0) / static_cast<double>(mel.data.size());
  }
  expected /= static_cast<double>(cfg.resolutions.size());
  CHECK(loss.loss(x.samples, silence.samples) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("property: loss identity, non-negativity, weights and resolution order") {
  Rng rng(21);
  const LossConfig cfg;
  const MultiResolutionLoss loss(cfg, 44100);
  LossConfig reversed = cfg;
  std::reverse(reversed.resolutions.begin(), reversed.resolutions.end());
  const MultiResolutionLoss loss_rev(reversed, 44100);
  LossConfig mag_only = cfg;
  mag_only.w_sc = 0.0;
  LossConfig mag_double = mag_only;
  mag_double.w_mag = 2.0;
  const MultiResolutionLoss l1(mag_only, 44100), l2(mag_double, 44100);

  for (int i = 0; i < 5; ++i) {
    const auto a = render(random_patch(rng)).samples;
    const auto b = render(random_patch(rng)).samples;
    CHECK(loss.loss(a, a) == 0.0);
    const double ab = loss.loss(a, b);
    CHECK(ab >= 0.0);
    CHECK(loss_rev.loss(a, b) == doctest::Approx(ab).epsilon(1e-12));
    CHECK(l2.loss(a, b) == doctest::Approx(2.0 * l1.loss(a, b)).epsilon(1e-12));
    const auto per = loss.resolution_losses(loss.analyze(a), b);
    CHECK(per.size() == 4);
    CHECK(std::accumulate(per.begin(), per.end(), 0.0) / 4.0 == doctest::Approx(ab).epsilon(1e-12));
  }
}

TEST_CASE("property: one coarse hop of delay costs less than silence") {
  // Smoke bound: delaying a sustained tone by 256 samples must stay well below
  // the loss of predicting nothing at all (documented threshold: half of it).
  Patch p;
  p.values.assign(kNumParams, 0.5);
  p.values[parameter_index("keyboard.duration")] = 1.0;
  p.values[parameter_index("mixer.noise_level")] = 0.0;
  const auto x = render(p).samples;
  std::vector<double> shifted(256, 0.0);
  shifted.insert(shifted.end(), x.begin(), x.end() - 256);
  const std::vector<double> silence(x.size(), 0.0);
  const MultiResolutionLoss loss(LossConfig{}, 44100);
  const double shift_loss = loss.loss(x, shifted);
  CHECK(std::isfinite(shift_loss));
  CHECK(shift_loss > 0.0);
  CHECK(shift_loss < 0.5 * loss.loss(x, silence));
}

TEST_CASE("shared loss object is safe across threads") {
  Rng rng(5);
  const auto a = render(random_patch(rng)).samples;
  const auto b = render(random_patch(rng)).samples;
  const MultiResolutionLoss loss(LossConfig{}, 44100);
  const double serial = loss.loss(a, b);
  std::vector<double> results(4);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) threads.emplace_back([&, t] { results[t] = loss.loss(a, b); });
  }
  for (double r : results) CHECK(r == serial);
}
