#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "synthmatch/param_space.hpp"

namespace synthmatch {

struct RenderConfig {
  int sample_rate = 44100;
  int control_rate = 441;
  double buffer_seconds = 2.0;
  std::uint64_t noise_seed = 0;

  std::size_t num_samples() const;
  std::size_t num_control_samples() const;
  int upsample_factor() const;
  void check() const;
};

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 44100;

  bool operator==(const AudioBuffer&) const = default;
};

struct ControlSignal {
  std::vector<double> samples;
  int rate = 441;
};

double midi_to_hz(double midi);

struct AdsrParams {
  double attack = 0.0;
  double decay = 0.0;
  double sustain = 1.0;
  double release = 0.0;
  double alpha = 1.0;
};

ControlSignal adsr_envelope(const AdsrParams& env, double note_on, int rate, std::size_t n);

enum class LfoShape { kSine, kTriangle, kSaw, kReverseSaw, kSquare };

/// One LFO waveform on phase `phi` (radians), range [-1,1].
double lfo_wave(LfoShape shape, double phi);

struct LfoParams {
  double frequency = 0.0;
  double mod_depth = 0.0;
  double initial_phase = 0.0;
  std::array<double, 5> shape_weights{};  // sin, tri, saw, rsaw, sqr
};

ControlSignal lfo_signal(const LfoParams& lfo, const ControlSignal& rate_env, const ControlSignal& amp_env);

inline constexpr std::size_t kModSources = 4;       // adsr_1, adsr_2, lfo_1, lfo_2
inline constexpr std::size_t kModDestinations = 5;  // vco1_pitch, vco1_amp, vco2_pitch, vco2_amp, noise_amp
using ModMatrix = std::array<std::array<double, kModDestinations>, kModSources>;

enum ModDestination : std::size_t { kVco1Pitch = 0, kVco1Amp, kVco2Pitch, kVco2Amp, kNoiseAmp };

std::array<ControlSignal, kModDestinations> mod_matrix_mix(const ModMatrix& weights,
                                                           const std::array<const ControlSignal*, kModSources>& sources);

/// Linear interpolation; the last control value is held for the final `factor` samples.
std::vector<double> upsample_control(std::span<const double> control, int factor);

enum class VcoKind { kSine, kSquareSaw };

struct VcoParams {
  double f0 = 440.0;
  double tuning = 0.0;
  double mod_depth = 0.0;
  double initial_phase = 0.0;
  double shape = 0.0;
};

/// `pitch_mod` is at audio rate; its length sets the output length.
std::vector<double> vco_render(VcoKind kind, const VcoParams& vco, std::span<const double> pitch_mod,
                               int sample_rate);

/// Signals produced on the way to the final buffer. Exposed for range checks.
struct VoiceSignals {
  std::array<ControlSignal, 6> envelopes;  // adsr_1, adsr_2, lfo_1_rate, lfo_1_amp, lfo_2_rate, lfo_2_amp
  std::array<ControlSignal, 2> lfos;
  std::array<ControlSignal, kModDestinations> modulation;
};

VoiceSignals render_control(const Patch& p, const RenderConfig& cfg);

AudioBuffer render(const Patch& p, const RenderConfig& cfg = {});

}  // namespace synthmatch
