#include "synthmatch/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

namespace synthmatch {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xFF));
}
void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  const std::string where = path.string();
  if (!std::filesystem::exists(path)) throw WavError(WavError::Kind::kMissing, "no such file: " + where);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavError::Kind::kIo, "cannot open " + where);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12) throw WavError(WavError::Kind::kTruncated, where + ": shorter than a RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) throw WavError(WavError::Kind::kFormat, where + ": missing RIFF magic");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) throw WavError(WavError::Kind::kFormat, where + ": not a WAVE file");

  FmtChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* id = bytes.data() + pos;
    const std::size_t size = le32(id + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw WavError(WavError::Kind::kTruncated, where + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      fmt.format = le16(f);
      fmt.channels = le16(f + 2);
      fmt.sample_rate = le32(f + 4);
      fmt.block_align = le16(f + 12);
      fmt.bits = le16(f + 14);
      if (fmt.format == kFormatExtensible) {
        if (size < 26) throw WavError(WavError::Kind::kFormat, where + ": short WAVE_FORMAT_EXTENSIBLE header");
        fmt.format = le16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (body + size > bytes.size()) throw WavError(WavError::Kind::kTruncated, where + ": data chunk runs past end of file");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw WavError(WavError::Kind::kFormat, where + ": no fmt chunk");
  if (data == nullptr) throw WavError(WavError::Kind::kTruncated, where + ": no data chunk");

  WavData out;
  out.channels = fmt.channels;
  out.sample_rate = static_cast<int>(fmt.sample_rate);
  if (fmt.format == kFormatPcm && fmt.bits == 16) out.format = WavFormat::kPcm16;
  else if (fmt.format == kFormatPcm && fmt.bits == 24) out.format = WavFormat::kPcm24;
  else if (fmt.format == kFormatFloat && fmt.bits == 32) out.format = WavFormat::kFloat32;
  else {
    throw WavError(WavError::Kind::kUnsupported, where + ": unsupported encoding (format " + std::to_string(fmt.format) +
                                                     ", " + std::to_string(fmt.bits) + " bits)");
  }
  if (fmt.channels == 0 || fmt.sample_rate == 0) throw WavError(WavError::Kind::kFormat, where + ": zero channels or rate");
  const std::size_t bytes_per_sample = fmt.bits / 8;
  const std::size_t frame = bytes_per_sample * fmt.channels;
  if (fmt.block_align != frame) throw WavError(WavError::Kind::kFormat, where + ": inconsistent block alignment");

  const std::size_t frames = data_size / frame;
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      const unsigned char* p = data + i * frame + c * bytes_per_sample;
      switch (out.format) {
        case WavFormat::kPcm16:
          acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
          break;
        case WavFormat::kPcm24: {
          std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
          if (v & 0x800000) v -= 0x1000000;
          acc += v / 8388608.0;
          break;
        }
        case WavFormat::kFloat32: {
          const std::uint32_t bits = le32(p);
          float f;
          std::memcpy(&f, &bits, sizeof f);
          acc += std::isfinite(f) ? std::clamp(static_cast<double>(f), -1.0, 1.0) : 0.0;
          break;
        }
      }
    }
    out.samples[i] = acc / fmt.channels;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate, WavFormat format) {
  if (sample_rate <= 0) throw std::invalid_argument("write_wav: sample rate must be positive");
  const std::uint16_t bits = format == WavFormat::kPcm16 ? 16 : (format == WavFormat::kPcm24 ? 24 : 32);
  const std::uint16_t code = format == WavFormat::kFloat32 ? kFormatFloat : kFormatPcm;
  const std::uint32_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(samples.size() * block);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, code);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * block);
  put16(out, static_cast<std::uint16_t>(block));
  put16(out, bits);
  put_tag(out, "data");
  put32(out, data_size);
  for (double x : samples) {
    const double v = std::isfinite(x) ? std::clamp(x, -1.0, 1.0) : 0.0;
    switch (format) {
      case WavFormat::kPcm16:
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(std::lround(v * 32768.0), -32768L, 32767L))));
        break;
      case WavFormat::kPcm24: {
        const auto q = static_cast<std::int32_t>(std::clamp(std::lround(v * 8388608.0), -8388608L, 8388607L));
        const auto u = static_cast<std::uint32_t>(q);
        out.push_back(static_cast<unsigned char>(u & 0xFF));
        out.push_back(static_cast<unsigned char>((u >> 8) & 0xFF));
        out.push_back(static_cast<unsigned char>((u >> 16) & 0xFF));
        break;
      }
      case WavFormat::kFloat32: {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof u);
        put32(out, u);
        break;
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw WavError(WavError::Kind::kIo, "cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError(WavError::Kind::kIo, "write failed: " + path.string());
}

namespace {

constexpr int kZeroCrossings = 16;
constexpr double kKaiserBeta = 8.6;
constexpr std::int64_t kMaxTabulatedPhases = 4096;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

class SincKernel {
 public:
  SincKernel(double cutoff) : cutoff_(cutoff), half_width_(static_cast<int>(std::ceil(kZeroCrossings / cutoff))) {}

  int half_width() const { return half_width_; }

  // Taps for x[base - half_width + 1 + j] at fractional offset `frac`, normalized to unit sum.
  void taps(double frac, std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(2 * half_width_));
    double sum = 0.0;
    for (int j = 0; j < 2 * half_width_; ++j) {
      const double tau = (j - half_width_ + 1) - frac;
      const double r = tau / half_width_;
      const double w = std::abs(r) >= 1.0 ? 0.0 : std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta_;
      out[static_cast<std::size_t>(j)] = cutoff_ * sinc(cutoff_ * tau) * w;
      sum += out[static_cast<std::size_t>(j)];
    }
    for (auto& t : out) t /= sum;
  }

 private:
  double cutoff_;
  int half_width_;
  double i0_beta_ = std::cyl_bessel_i(0.0, kKaiserBeta);
};

}  // namespace

std::vector<double> resample(std::span<const double> x, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw std::invalid_argument("resample: rates must be positive");
  if (from_rate == to_rate) return {x.begin(), x.end()};
  const std::int64_t g = std::gcd(from_rate, to_rate);
  const std::int64_t up = to_rate / g, down = from_rate / g;
  const auto len = static_cast<std::int64_t>(x.size());
  const std::int64_t out_len = (len * to_rate + from_rate / 2) / from_rate;
  std::vector<double> y(static_cast<std::size_t>(out_len));
  if (len == 0) return y;

  const SincKernel kernel(std::min(1.0, static_cast<double>(to_rate) / from_rate));
  const int hw = kernel.half_width();

  std::vector<std::vector<double>> table;
  if (up <= kMaxTabulatedPhases) {
    table.resize(static_cast<std::size_t>(up));
    for (std::int64_t p = 0; p < up; ++p) kernel.taps(static_cast<double>(p) / up, table[static_cast<std::size_t>(p)]);
  }
  std::vector<double> scratch;
  for (std::int64_t j = 0; j < out_len; ++j) {
    const std::int64_t pos = j * down;
    const std::int64_t base = pos / up;
    const std::int64_t phase = pos % up;
    const std::vector<double>* taps;
    if (table.empty()) {
      kernel.taps(static_cast<double>(phase) / up, scratch);
      taps = &scratch;
    } else {
      taps = &table[static_cast<std::size_t>(phase)];
    }
    double acc = 0.0;
    for (int k = 0; k < 2 * hw; ++k) {
      // Edge samples are held so constant signals stay constant.
      const std::int64_t idx = std::clamp<std::int64_t>(base - hw + 1 + k, 0, len - 1);
      acc += (*taps)[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(idx)];
    }
    y[static_cast<std::size_t>(j)] = acc;
  }
  return y;
}

std::vector<double> fix_length(std::span<const double> x, std::size_t n) {
  std::vector<double> out(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(std::min(n, x.size())));
  out.resize(n, 0.0);
  return out;
}

std::vector<double> peak_normalize(std::span<const double> x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  std::vector<double> out(x.begin(), x.end());
  if (peak > 0.0) {
    for (auto& v : out) v /= peak;
  }
  return out;
}

}  // namespace synthmatch
