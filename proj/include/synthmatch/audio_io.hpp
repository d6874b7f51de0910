#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthmatch {

enum class WavFormat { kPcm16, kPcm24, kFloat32 };

class WavError : public std::runtime_error {
 public:
  enum class Kind { kMissing, kTruncated, kFormat, kUnsupported, kIo };
  WavError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct WavData {
  std::vector<double> samples;  // mono, [-1,1]
  int sample_rate = 0;
  int channels = 0;
  WavFormat format = WavFormat::kPcm16;
};

/// Multi-channel input is averaged to mono.
WavData read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate,
               WavFormat format = WavFormat::kPcm16);

/// Kaiser-windowed sinc, polyphase over the reduced rate ratio.
std::vector<double> resample(std::span<const double> x, int from_rate, int to_rate);

std::vector<double> fix_length(std::span<const double> x, std::size_t n);

/// Scales so the largest magnitude is 1; silent input is returned unchanged.
std::vector<double> peak_normalize(std::span<const double> x);

}  // namespace synthmatch
