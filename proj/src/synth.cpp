#include "synthmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace synthmatch {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double frac(double x) { return x - std::floor(x); }

// Offsets into the descriptor table; order is fixed by build_table().
constexpr std::size_t kMidiF0 = 0;
constexpr std::size_t kDuration = 1;
constexpr std::size_t kAdsrBase = 2;    // 6 x {attack, decay, sustain, release, alpha}
constexpr std::size_t kLfoBase = 32;    // 2 x {frequency, mod_depth, initial_phase, 5 weights}
constexpr std::size_t kMatrixBase = 48; // 4 x 5, source-major
constexpr std::size_t kVco1Base = 68;   // tuning, mod_depth, initial_phase
constexpr std::size_t kVco2Base = 71;   // tuning, mod_depth, initial_phase, shape
constexpr std::size_t kMixerBase = 75;  // vco_1, vco_2, noise
static_assert(kMixerBase + 3 == kNumParams);

}  // namespace

std::size_t RenderConfig::num_samples() const {
  return static_cast<std::size_t>(std::llround(sample_rate * buffer_seconds));
}

std::size_t RenderConfig::num_control_samples() const {
  const std::size_t n = num_samples();
  const auto f = static_cast<std::size_t>(upsample_factor());
  return (n + f - 1) / f;
}

int RenderConfig::upsample_factor() const { return sample_rate / control_rate; }

void RenderConfig::check() const {
  if (sample_rate <= 0 || control_rate <= 0) throw std::invalid_argument("RenderConfig: rates must be positive");
  if (sample_rate % control_rate != 0) {
    throw std::invalid_argument("RenderConfig: sample_rate must be divisible by control_rate");
  }
  if (!(buffer_seconds > 0.0)) throw std::invalid_argument("RenderConfig: buffer_seconds must be positive");
}

double midi_to_hz(double midi) {
  if (!(midi >= 0.0 && midi <= 127.0)) throw DomainError("midi_to_hz: note outside [0,127]");
  return 440.0 * std::exp2((midi - 69.0) / 12.0);
}

ControlSignal adsr_envelope(const AdsrParams& env, double note_on, int rate, std::size_t n) {
  const double a = env.attack, d = env.decay, s = env.sustain, r = env.release, alpha = env.alpha;

  auto held = [&](double t) {
    if (a > 0.0 && t < a) return std::pow(t / a, alpha);
    const double td = t - std::max(a, 0.0);
    if (d > 0.0 && td < d) return 1.0 - (1.0 - s) * std::pow(td / d, alpha);
    return s;
  };
  const double level_at_off = std::clamp(held(note_on), 0.0, 1.0);

  ControlSignal out;
  out.rate = rate;
  out.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate;
    double v;
    if (t < note_on) {
      v = held(t);
    } else {
      const double tr = t - note_on;
      v = (r > 0.0 && tr < r) ? level_at_off * (1.0 - std::pow(tr / r, alpha)) : 0.0;
    }
    out.samples[k] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

double lfo_wave(LfoShape shape, double phi) {
  switch (shape) {
    case LfoShape::kSine:
      return std::sin(phi);
    case LfoShape::kTriangle:
      return std::clamp(std::asin(std::sin(phi)) * (2.0 / std::numbers::pi), -1.0, 1.0);
    case LfoShape::kSaw:
      return 2.0 * frac(phi / kTwoPi) - 1.0;
    case LfoShape::kReverseSaw:
      return 1.0 - 2.0 * frac(phi / kTwoPi);
    case LfoShape::kSquare:
      return std::sin(phi) >= 0.0 ? 1.0 : -1.0;
  }
  return 0.0;
}

ControlSignal lfo_signal(const LfoParams& lfo, const ControlSignal& rate_env, const ControlSignal& amp_env) {
  if (rate_env.samples.size() != amp_env.samples.size() || rate_env.rate != amp_env.rate) {
    throw std::invalid_argument("lfo_signal: envelopes must share rate and length");
  }
  const std::size_t n = rate_env.samples.size();
  const double rate = rate_env.rate;

  double total = 0.0;
  for (double w : lfo.shape_weights) total += w;
  std::array<double, 5> mix{};
  for (std::size_t k = 0; k < 5; ++k) mix[k] = lfo.shape_weights[k] / (total + 1e-8);

  ControlSignal out;
  out.rate = rate_env.rate;
  out.samples.resize(n);
  double phi = lfo.initial_phase;
  for (std::size_t k = 0; k < n; ++k) {
    double v = 0.0;
    for (std::size_t s = 0; s < 5; ++s) {
      if (mix[s] != 0.0) v += mix[s] * lfo_wave(static_cast<LfoShape>(s), phi);
    }
    out.samples[k] = std::clamp(amp_env.samples[k] * v, -1.0, 1.0);
    const double f = std::clamp(lfo.frequency + lfo.mod_depth * rate_env.samples[k], 0.0, 20.0);
    phi = std::fmod(phi + kTwoPi * f / rate, kTwoPi);
  }
  return out;
}

std::array<ControlSignal, kModDestinations> mod_matrix_mix(const ModMatrix& weights,
                                                           const std::array<const ControlSignal*, kModSources>& sources) {
  const std::size_t n = sources[0]->samples.size();
  const int rate = sources[0]->rate;
  for (const auto* s : sources) {
    if (s->samples.size() != n || s->rate != rate) {
      throw std::invalid_argument("mod_matrix_mix: sources must share rate and length");
    }
  }
  std::array<ControlSignal, kModDestinations> out;
  for (std::size_t j = 0; j < kModDestinations; ++j) {
    const bool pitch = (j == kVco1Pitch || j == kVco2Pitch);
    out[j].rate = rate;
    out[j].samples.assign(n, 0.0);
    for (std::size_t i = 0; i < kModSources; ++i) {
      const double w = weights[i][j];
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) out[j].samples[k] += w * sources[i]->samples[k];
    }
    for (auto& v : out[j].samples) v = pitch ? std::clamp(v, -1.0, 1.0) : std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::vector<double> upsample_control(std::span<const double> control, int factor) {
  if (factor < 1) throw std::invalid_argument("upsample_control: factor must be a positive integer");
  const std::size_t n = control.size();
  const auto f = static_cast<std::size_t>(factor);
  std::vector<double> out(n * f);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = control[i];
    const double b = (i + 1 < n) ? control[i + 1] : a;
    const double step = (b - a) / factor;
    for (std::size_t k = 0; k < f; ++k) out[i * f + k] = a + step * static_cast<double>(k);
  }
  return out;
}

namespace {

// Shapes a phase track (in cycles) into the oscillator waveform, in place.
void shape_waveform(VcoKind kind, double shape, std::vector<double>& phase) {
  if (kind == VcoKind::kSine) {
    for (auto& ph : phase) ph = std::sin(kTwoPi * ph);
    return;
  }
  shape = std::clamp(shape, 0.0, 1.0);
  for (auto& ph : phase) {
    const double x = 20.0 * std::sin(kTwoPi * ph);
    // tanh through a single exp; agrees with std::tanh to a few ulp. Beyond
    // |x| = 19 the quotient rounds to exactly 1, so the exp is skipped.
    double squarish = std::copysign(1.0, x);
    if (std::abs(x) < 19.0) {
      const double t = std::exp(-2.0 * std::abs(x));
      squarish = std::copysign((1.0 - t) / (1.0 + t), x);
    }
    ph = (1.0 - shape) * squarish + shape * (2.0 * ph - 1.0);
  }
}

// Phase track for a pitch modulation given at control rate and linearly
// interpolated by `factor`. Semitones are linear within a block, so the
// frequency is geometric there and one exp2 per block suffices.
std::vector<double> phase_from_control(const VcoParams& vco, std::span<const double> control, int factor,
                                       std::size_t n, int sample_rate) {
  const double nyquist = 0.5 * sample_rate;
  const auto f = static_cast<std::size_t>(factor);
  std::vector<double> phase(n);
  double cycles = frac(vco.initial_phase / kTwoPi);
  std::size_t k = 0;
  for (std::size_t i = 0; i < control.size() && k < n; ++i) {
    const double a = control[i];
    const double b = (i + 1 < control.size()) ? control[i + 1] : a;
    const double step = (b - a) / factor;
    double g = vco.f0 * std::exp2((vco.tuning + vco.mod_depth * a) / 12.0);
    const double ratio = std::exp2(vco.mod_depth * step / 12.0);
    for (std::size_t j = 0; j < f && k < n; ++j, ++k) {
      phase[k] = cycles;
      cycles += std::clamp(g, 0.0, nyquist) / sample_rate;
      cycles -= std::floor(cycles);
      g *= ratio;
    }
  }
  return phase;
}

}  // namespace

std::vector<double> vco_render(VcoKind kind, const VcoParams& vco, std::span<const double> pitch_mod,
                               int sample_rate) {
  const std::size_t n = pitch_mod.size();
  const double nyquist = 0.5 * sample_rate;
  // Phase tracked in cycles so the saw term needs no division. The phase used
  // at sample k only depends on earlier increments.
  std::vector<double> phase(n);
  double cycles = frac(vco.initial_phase / kTwoPi);
  for (std::size_t k = 0; k < n; ++k) {
    phase[k] = cycles;
    const double semis = vco.tuning + vco.mod_depth * pitch_mod[k];
    const double f = std::clamp(vco.f0 * std::exp2(semis / 12.0), 0.0, nyquist);
    cycles += f / sample_rate;
    cycles -= std::floor(cycles);
  }
  shape_waveform(kind, vco.shape, phase);
  return phase;
}

VoiceSignals render_control(const Patch& p, const RenderConfig& cfg) {
  cfg.check();
  if (auto v = validate_patch(p); !v.empty()) throw DomainError("render: invalid patch: " + v.front().message);
  const std::vector<double> x = denormalize_all(p.values);
  const std::size_t nc = cfg.num_control_samples();
  const double note_on = x[kDuration];

  VoiceSignals sig;
  for (std::size_t e = 0; e < 6; ++e) {
    const std::size_t b = kAdsrBase + 5 * e;
    sig.envelopes[e] = adsr_envelope({x[b], x[b + 1], x[b + 2], x[b + 3], x[b + 4]}, note_on, cfg.control_rate, nc);
  }
  for (std::size_t l = 0; l < 2; ++l) {
    const std::size_t b = kLfoBase + 8 * l;
    LfoParams lp{x[b], x[b + 1], x[b + 2], {x[b + 3], x[b + 4], x[b + 5], x[b + 6], x[b + 7]}};
    sig.lfos[l] = lfo_signal(lp, sig.envelopes[2 + 2 * l], sig.envelopes[3 + 2 * l]);
  }
  ModMatrix w{};
  for (std::size_t i = 0; i < kModSources; ++i) {
    for (std::size_t j = 0; j < kModDestinations; ++j) w[i][j] = x[kMatrixBase + i * kModDestinations + j];
  }
  sig.modulation = mod_matrix_mix(w, {&sig.envelopes[0], &sig.envelopes[1], &sig.lfos[0], &sig.lfos[1]});
  return sig;
}

AudioBuffer render(const Patch& p, const RenderConfig& cfg) {
  const VoiceSignals sig = render_control(p, cfg);
  const std::vector<double> x = denormalize_all(p.values);
  const std::size_t n = cfg.num_samples();
  const int factor = cfg.upsample_factor();

  AudioBuffer out;
  out.sample_rate = cfg.sample_rate;
  out.samples.assign(n, 0.0);

  const double level1 = x[kMixerBase], level2 = x[kMixerBase + 1], level_noise = x[kMixerBase + 2];
  const double f0 = midi_to_hz(x[kMidiF0]);

  auto audio_rate = [&](ModDestination d) {
    auto up = upsample_control(sig.modulation[d].samples, factor);
    up.resize(n);
    return up;
  };

  if (level1 != 0.0) {
    const auto amp = audio_rate(kVco1Amp);
    auto osc = phase_from_control({f0, x[kVco1Base], x[kVco1Base + 1], x[kVco1Base + 2], 0.0},
                                  sig.modulation[kVco1Pitch].samples, factor, n, cfg.sample_rate);
    shape_waveform(VcoKind::kSine, 0.0, osc);
    for (std::size_t k = 0; k < n; ++k) out.samples[k] += level1 * amp[k] * osc[k];
  }
  if (level2 != 0.0) {
    const auto amp = audio_rate(kVco2Amp);
    auto osc = phase_from_control({f0, x[kVco2Base], x[kVco2Base + 1], x[kVco2Base + 2], x[kVco2Base + 3]},
                                  sig.modulation[kVco2Pitch].samples, factor, n, cfg.sample_rate);
    shape_waveform(VcoKind::kSquareSaw, x[kVco2Base + 3], osc);
    for (std::size_t k = 0; k < n; ++k) out.samples[k] += level2 * amp[k] * osc[k];
  }
  if (level_noise != 0.0) {
    const auto amp = audio_rate(kNoiseAmp);
    Rng noise(cfg.noise_seed);
    for (std::size_t k = 0; k < n; ++k) out.samples[k] += level_noise * amp[k] * noise.uniform(-1.0, 1.0);
  }
  for (auto& v : out.samples) v = std::clamp(v, -1.0, 1.0);
  return out;
}

}  // namespace synthmatch
