#include "synthmatch/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace synthmatch {

double Rng::normal() {
  // Marsaglia polar method.
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double x, y, s;
  do {
    x = uniform(-1.0, 1.0);
    y = uniform(-1.0, 1.0);
    s = x * x + y * y;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = y * m;
  has_spare_ = true;
  return x * m;
}

double Rng::gamma(double shape) {
  // Marsaglia & Tsang; shape < 1 boosted via U^(1/shape).
  if (shape < 1.0) {
    double u = uniform();
    while (u == 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

namespace {

std::vector<ParameterDescriptor> build_table() {
  constexpr double pi = std::numbers::pi;
  std::vector<ParameterDescriptor> t;
  t.reserve(kNumParams);
  auto add = [&t](std::string name, double lo, double hi, double curve, std::string unit) {
    t.push_back({std::move(name), lo, hi, curve, std::move(unit)});
  };

  add("keyboard.midi_f0", 0.0, 127.0, 1.0, "midi");
  add("keyboard.duration", 0.01, 4.0, 0.5, "seconds");

  for (const char* adsr : {"adsr_1", "adsr_2", "lfo_1_rate_adsr", "lfo_1_amp_adsr",
                           "lfo_2_rate_adsr", "lfo_2_amp_adsr"}) {
    const std::string p = std::string(adsr) + ".";
    add(p + "attack", 0.0, 2.0, 2.0, "seconds");
    add(p + "decay", 0.0, 2.0, 2.0, "seconds");
    add(p + "sustain", 0.0, 1.0, 1.0, "ratio");
    add(p + "release", 0.0, 5.0, 2.0, "seconds");
    add(p + "alpha", 0.1, 6.0, 1.0, "ratio");
  }

  for (const char* lfo : {"lfo_1", "lfo_2"}) {
    const std::string p = std::string(lfo) + ".";
    add(p + "frequency", 0.0, 20.0, 2.0, "hertz");
    add(p + "mod_depth", -10.0, 20.0, 1.0, "hertz");
    add(p + "initial_phase", -pi, pi, 1.0, "radians");
    for (const char* shape : {"sin", "tri", "saw", "rsaw", "sqr"}) add(p + shape, 0.0, 1.0, 1.0, "ratio");
  }

  for (const char* src : {"adsr_1", "adsr_2", "lfo_1", "lfo_2"}) {
    for (const char* dst : {"vco1_pitch", "vco1_amp", "vco2_pitch", "vco2_amp", "noise_amp"}) {
      add(std::string("mod_matrix.") + src + "." + dst, 0.0, 1.0, 0.5, "ratio");
    }
  }

  for (const char* vco : {"vco_1", "vco_2"}) {
    const std::string p = std::string(vco) + ".";
    add(p + "tuning", -24.0, 24.0, 1.0, "semitones");
    add(p + "mod_depth", -96.0, 96.0, 1.0, "semitones");
    add(p + "initial_phase", -pi, pi, 1.0, "radians");
  }
  add("vco_2.shape", 0.0, 1.0, 1.0, "ratio");

  add("mixer.vco_1_level", 0.0, 1.0, 1.0, "ratio");
  add("mixer.vco_2_level", 0.0, 1.0, 1.0, "ratio");
  add("mixer.noise_level", 0.0, 1.0, 1.0, "ratio");
  return t;
}

}  // namespace

const std::vector<ParameterDescriptor>& descriptor_table() {
  static const std::vector<ParameterDescriptor> table = build_table();
  return table;
}

std::optional<std::size_t> find_parameter(std::string_view name) {
  const auto& t = descriptor_table();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t parameter_index(std::string_view name) {
  if (auto i = find_parameter(name)) return *i;
  throw std::invalid_argument("unknown parameter: " + std::string(name));
}

double denormalize(double u, const ParameterDescriptor& d) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError("denormalize: " + d.name + " value " + std::to_string(u) + " outside [0,1]");
  }
  return d.min + (d.max - d.min) * std::pow(u, d.curve);
}

double normalize(double v, const ParameterDescriptor& d) {
  if (!(v >= d.min && v <= d.max)) {
    throw DomainError("normalize: " + d.name + " value " + std::to_string(v) + " outside [" +
                      std::to_string(d.min) + ", " + std::to_string(d.max) + "]");
  }
  const double r = (v - d.min) / (d.max - d.min);
  return std::clamp(std::pow(r, 1.0 / d.curve), 0.0, 1.0);
}

std::vector<double> denormalize_all(std::span<const double> values) {
  const auto& t = descriptor_table();
  if (values.size() != t.size()) throw DomainError("denormalize_all: expected 78 values");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = denormalize(values[i], t[i]);
  return out;
}

Patch random_patch(Rng& rng) {
  Patch p;
  p.values.resize(kNumParams);
  for (auto& v : p.values) v = rng.uniform();
  return p;
}

std::vector<Violation> validate_patch(const Patch& p) {
  std::vector<Violation> out;
  if (p.values.size() != kNumParams) {
    out.push_back({std::nullopt, "expected " + std::to_string(kNumParams) + " values, got " +
                                     std::to_string(p.values.size())});
  }
  const auto& t = descriptor_table();
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double v = p.values[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream msg;
      msg << "index " << i;
      if (i < t.size()) msg << " (" << t[i].name << ")";
      msg << ": value " << v << " outside [0,1]";
      out.push_back({i, msg.str()});
    }
  }
  return out;
}

std::string descriptor_table_json() {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& d : descriptor_table()) {
    arr.push_back({{"name", d.name}, {"min", d.min}, {"max", d.max}, {"curve", d.curve}, {"unit", d.unit}});
  }
  return arr.dump();
}

std::uint64_t descriptor_table_hash() {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : descriptor_table_json()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace synthmatch
