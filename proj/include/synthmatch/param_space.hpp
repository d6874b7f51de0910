#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace synthmatch {

inline constexpr std::size_t kNumParams = 78;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// One synthesizer parameter: physical range, denormalization curve and unit.
struct ParameterDescriptor {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  double curve = 1.0;
  std::string unit;
};

/// A point in normalized parameter space [0,1]^78 with optional provenance.
struct Patch {
  std::vector<double> values;
  std::optional<std::string> label;
  std::optional<std::string> source;

  bool operator==(const Patch&) const = default;
};

/// Seeded random source shared by every stochastic component.
///
/// Uniform draws are formed from the top 53 bits of the engine output so
/// sequences do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }
  double normal();
  double gamma(double shape);
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// The fixed, ordered table of all 78 descriptors.
const std::vector<ParameterDescriptor>& descriptor_table();

/// Index of a descriptor by dot-path name; nullopt when unknown.
std::optional<std::size_t> find_parameter(std::string_view name);
std::size_t parameter_index(std::string_view name);  // throws when unknown

double denormalize(double u, const ParameterDescriptor& d);
double normalize(double v, const ParameterDescriptor& d);

std::vector<double> denormalize_all(std::span<const double> values);

Patch random_patch(Rng& rng);

struct Violation {
  std::optional<std::size_t> index;  // empty for length violations
  std::string message;
};

/// Empty result means the patch is valid.
std::vector<Violation> validate_patch(const Patch& p);

/// JSON array of {name, min, max, curve, unit}.
std::string descriptor_table_json();

/// FNV-1a 64 of descriptor_table_json().
std::uint64_t descriptor_table_hash();

}  // namespace synthmatch
