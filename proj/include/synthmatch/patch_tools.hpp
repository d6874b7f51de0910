#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthmatch/param_space.hpp"

namespace synthmatch {

inline constexpr int kPatchSchemaVersion = 1;

class PatchLoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PatchMeta {
  std::optional<std::string> target;
  std::optional<double> loss;
};

struct LoadedPatch {
  Patch patch;
  PatchMeta meta;
};

nlohmann::ordered_json patch_to_json(const Patch& p, const PatchMeta& meta = {});
LoadedPatch patch_from_json(const nlohmann::json& j);

void save_patch(const Patch& p, const PatchMeta& meta, const std::filesystem::path& path);
LoadedPatch load_patch(const std::filesystem::path& path);

/// All *.json patch files in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_patch_files(const std::filesystem::path& dir);

// Edits. Each returns a new patch and touches only the named parameter.

Patch pitch_shift(const Patch& p, double semitones);
Patch denoise(const Patch& p);

inline constexpr std::string_view kAdsrNames[] = {"adsr_1", "adsr_2", "lfo_1_rate_adsr",
                                                  "lfo_1_amp_adsr", "lfo_2_rate_adsr", "lfo_2_amp_adsr"};

/// `field` is attack, decay, sustain or release; throws std::invalid_argument otherwise.
Patch scale_envelope(const Patch& p, std::string_view adsr_name, std::string_view field, double factor);

struct FeatureRow {
  std::string label;
  double midi_f0 = 0.0;
  double duration = 0.0;
  double norm_f0 = 0.0;
  double norm_duration = 0.0;
};

std::vector<FeatureRow> extract_features(std::span<const Patch> patches);

/// Header: label,midi_f0,duration_sec,norm_f0,norm_duration
std::string features_csv(std::span<const FeatureRow> rows);

enum class CovarianceMode { kDiagonal, kFull };

/// Gaussian over unnormalized parameter values.
struct GaussianPatchModel {
  std::vector<std::string> dims;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  CovarianceMode mode = CovarianceMode::kDiagonal;
  int fit_count = 0;
  std::optional<std::string> label;
};

inline constexpr double kVarianceFloor = 1e-8;

/// Empty `dims` means all 78 parameters. Label is taken from the first patch when all labels agree.
GaussianPatchModel fit_gaussian(std::span<const Patch> patches, const std::vector<std::string>& dims = {},
                                CovarianceMode mode = CovarianceMode::kDiagonal);

/// Raw draws before clamping, one row per sample.
Eigen::MatrixXd draw_unclamped(const GaussianPatchModel& model, std::size_t n, Rng& rng);

/// Clamped to descriptor ranges and renormalized. Parameters outside the model
/// are copied from a uniformly chosen `base` patch.
std::vector<Patch> sample_patches(const GaussianPatchModel& model, std::span<const Patch> base, std::size_t n,
                                  Rng& rng);

nlohmann::ordered_json model_to_json(const GaussianPatchModel& model);
GaussianPatchModel model_from_json(const nlohmann::json& j);

/// The (midi_f0, duration) subset.
const std::vector<std::string>& f0_duration_dims();

}  // namespace synthmatch
