#include "synthmatch/patch_tools.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace synthmatch {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Patch with_value(const Patch& p, std::size_t index, double physical) {
  const auto& d = descriptor_table()[index];
  Patch out = p;
  out.values[index] = normalize(std::clamp(physical, d.min, d.max), d);
  return out;
}

void require_valid(const Patch& p, const char* op) {
  if (auto v = validate_patch(p); !v.empty()) throw DomainError(std::string(op) + ": invalid patch: " + v.front().message);
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) s += (s.empty() ? "" : ", ") + i;
  return s;
}

}  // namespace

ordered_json patch_to_json(const Patch& p, const PatchMeta& meta) {
  require_valid(p, "patch_to_json");
  ordered_json j;
  j["schema_version"] = kPatchSchemaVersion;
  j["label"] = p.label ? json(*p.label) : json(nullptr);
  j["source"] = p.source ? json(*p.source) : json(nullptr);
  j["target"] = meta.target ? json(*meta.target) : json(nullptr);
  j["loss"] = meta.loss ? json(*meta.loss) : json(nullptr);
  ordered_json params = ordered_json::object();
  const auto& table = descriptor_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    params[table[i].name] = {{"normalized", p.values[i]}, {"value", denormalize(p.values[i], table[i])}, {"unit", table[i].unit}};
  }
  j["parameters"] = std::move(params);
  return j;
}

LoadedPatch patch_from_json(const json& j) {
  if (!j.is_object()) throw PatchLoadError("patch file: top level must be an object");
  static const std::vector<std::string> top_keys = {"schema_version", "label", "source", "target", "loss", "parameters"};
  std::vector<std::string> unknown;
  for (const auto& [k, v] : j.items()) {
    if (std::find(top_keys.begin(), top_keys.end(), k) == top_keys.end()) unknown.push_back(k);
  }
  if (!unknown.empty()) throw PatchLoadError("patch file: unknown keys: " + join(unknown));
  if (!j.contains("schema_version") || j["schema_version"] != kPatchSchemaVersion) {
    throw PatchLoadError("patch file: schema_version must be " + std::to_string(kPatchSchemaVersion));
  }
  if (!j.contains("parameters") || !j["parameters"].is_object()) throw PatchLoadError("patch file: missing parameters object");
  const json& params = j["parameters"];

  for (const auto& [k, v] : params.items()) {
    if (!find_parameter(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) throw PatchLoadError("patch file: unknown parameters: " + join(unknown));

  const auto& table = descriptor_table();
  std::vector<std::string> missing;
  for (const auto& d : table) {
    if (!params.contains(d.name)) missing.push_back(d.name);
  }
  if (!missing.empty()) throw PatchLoadError("patch file: missing parameters: " + join(missing));

  LoadedPatch out;
  out.patch.values.resize(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const json& entry = params[table[i].name];
    if (!entry.is_object() || !entry.contains("normalized") || !entry["normalized"].is_number()) {
      throw PatchLoadError("patch file: " + table[i].name + " lacks a numeric 'normalized' value");
    }
    const double u = entry["normalized"].get<double>();
    if (!(u >= 0.0 && u <= 1.0)) throw PatchLoadError("patch file: " + table[i].name + " normalized value outside [0,1]");
    if (entry.contains("value")) {
      const double expected = denormalize(u, table[i]);
      const double tol = 1e-9 * std::max(1.0, table[i].max - table[i].min);
      if (!entry["value"].is_number() || std::abs(entry["value"].get<double>() - expected) > tol) {
        throw PatchLoadError("patch file: " + table[i].name + " value disagrees with its normalized value");
      }
    }
    out.patch.values[i] = u;
  }
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw PatchLoadError(std::string("patch file: '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  out.patch.label = opt_string("label");
  out.patch.source = opt_string("source");
  out.meta.target = opt_string("target");
  if (j.contains("loss") && !j["loss"].is_null()) {
    if (!j["loss"].is_number()) throw PatchLoadError("patch file: 'loss' must be a number");
    out.meta.loss = j["loss"].get<double>();
  }
  return out;
}

void save_patch(const Patch& p, const PatchMeta& meta, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << patch_to_json(p, meta).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LoadedPatch load_patch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PatchLoadError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw PatchLoadError(path.string() + ": " + e.what());
  }
  try {
    return patch_from_json(j);
  } catch (const PatchLoadError& e) {
    throw PatchLoadError(path.string() + ": " + e.what());
  }
}

std::vector<std::filesystem::path> list_patch_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".json" && name.find("manifest") == std::string::npos &&
        name != "model.json") {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Patch pitch_shift(const Patch& p, double semitones) {
  require_valid(p, "pitch_shift");
  const std::size_t i = parameter_index("keyboard.midi_f0");
  if (semitones == 0.0) return p;
  return with_value(p, i, denormalize(p.values[i], descriptor_table()[i]) + semitones);
}

Patch denoise(const Patch& p) {
  require_valid(p, "denoise");
  Patch out = p;
  out.values[parameter_index("mixer.noise_level")] = 0.0;
  return out;
}

Patch scale_envelope(const Patch& p, std::string_view adsr_name, std::string_view field, double factor) {
  require_valid(p, "scale_envelope");
  if (std::find(std::begin(kAdsrNames), std::end(kAdsrNames), adsr_name) == std::end(kAdsrNames)) {
    throw std::invalid_argument("unknown ADSR '" + std::string(adsr_name) + "'");
  }
  if (field != "attack" && field != "decay" && field != "sustain" && field != "release") {
    throw std::invalid_argument("unknown envelope field '" + std::string(field) + "'");
  }
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw std::invalid_argument("envelope scale factor must be >= 0");
  if (factor == 1.0) return p;
  const std::size_t i = parameter_index(std::string(adsr_name) + "." + std::string(field));
  return with_value(p, i, denormalize(p.values[i], descriptor_table()[i]) * factor);
}

std::vector<FeatureRow> extract_features(std::span<const Patch> patches) {
  const std::size_t f0 = parameter_index("keyboard.midi_f0");
  const std::size_t dur = parameter_index("keyboard.duration");
  const auto& table = descriptor_table();
  std::vector<FeatureRow> rows;
  rows.reserve(patches.size());
  for (const auto& p : patches) {
    require_valid(p, "extract_features");
    rows.push_back({p.label.value_or(""), denormalize(p.values[f0], table[f0]), denormalize(p.values[dur], table[dur]),
                    p.values[f0], p.values[dur]});
  }
  return rows;
}

std::string features_csv(std::span<const FeatureRow> rows) {
  std::ostringstream out;
  out.precision(12);
  out << "label,midi_f0,duration_sec,norm_f0,norm_duration\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.midi_f0 << ',' << r.duration << ',' << r.norm_f0 << ',' << r.norm_duration << '\n';
  }
  return out.str();
}

const std::vector<std::string>& f0_duration_dims() {
  static const std::vector<std::string> dims = {"keyboard.midi_f0", "keyboard.duration"};
  return dims;
}

GaussianPatchModel fit_gaussian(std::span<const Patch> patches, const std::vector<std::string>& dims,
                                CovarianceMode mode) {
  if (patches.size() < 2) throw std::invalid_argument("fit_gaussian: need at least 2 patches");
  GaussianPatchModel model;
  model.mode = mode;
  if (dims.empty()) {
    for (const auto& d : descriptor_table()) model.dims.push_back(d.name);
  } else {
    model.dims = dims;
  }
  std::vector<std::size_t> idx;
  for (const auto& name : model.dims) idx.push_back(parameter_index(name));

  const auto n = static_cast<Eigen::Index>(patches.size());
  const auto d = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Patch& p = patches[static_cast<std::size_t>(r)];
    require_valid(p, "fit_gaussian");
    for (Eigen::Index c = 0; c < d; ++c) {
      const std::size_t i = idx[static_cast<std::size_t>(c)];
      x(r, c) = denormalize(p.values[i], descriptor_table()[i]);
    }
  }
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  if (mode == CovarianceMode::kDiagonal) {
    model.covariance = cov.diagonal().cwiseMax(kVarianceFloor).asDiagonal();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < 0.0) {
      std::cerr << "warning: fitted covariance is not positive semidefinite (min eigenvalue " << ev.minCoeff()
                << "); clipping eigenvalues at " << kVarianceFloor << "\n";
    }
    model.covariance = es.eigenvectors() * ev.cwiseMax(kVarianceFloor).asDiagonal() * es.eigenvectors().transpose();
    model.covariance = (0.5 * (model.covariance + model.covariance.transpose())).eval();
  }
  model.fit_count = static_cast<int>(patches.size());

  const auto& first = patches.front().label;
  if (std::all_of(patches.begin(), patches.end(), [&](const Patch& p) { return p.label == first; })) model.label = first;
  return model;
}

Eigen::MatrixXd draw_unclamped(const GaussianPatchModel& model, std::size_t n, Rng& rng) {
  const Eigen::Index d = model.mean.size();
  Eigen::MatrixXd factor;
  if (model.mode == CovarianceMode::kDiagonal) {
    factor = model.covariance.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.covariance);
    factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd z(d);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) z(c) = rng.normal();
    out.row(r) = (model.mean + factor * z).transpose();
  }
  return out;
}

std::vector<Patch> sample_patches(const GaussianPatchModel& model, std::span<const Patch> base, std::size_t n,
                                  Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_patches: n must be >= 1");
  const bool subset = model.dims.size() < kNumParams;
  if (subset && base.empty()) throw std::invalid_argument("sample_patches: subset model needs base patches");
  std::vector<std::size_t> idx;
  for (const auto& name : model.dims) idx.push_back(parameter_index(name));

  const Eigen::MatrixXd raw = draw_unclamped(model, n, rng);
  std::vector<Patch> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    Patch p;
    if (subset) {
      p.values = base[rng.index(base.size())].values;
    } else {
      p.values.assign(kNumParams, 0.0);
    }
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const auto& d = descriptor_table()[idx[c]];
      p.values[idx[c]] = normalize(std::clamp(raw(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)), d.min, d.max), d);
    }
    p.label = model.label;
    p.source = "sampled";
    out.push_back(std::move(p));
  }
  return out;
}

ordered_json model_to_json(const GaussianPatchModel& model) {
  ordered_json j;
  j["dims"] = model.dims;
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  ordered_json cov = ordered_json::array();
  for (Eigen::Index r = 0; r < model.covariance.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(model.covariance.cols()));
    for (Eigen::Index c = 0; c < model.covariance.cols(); ++c) row[static_cast<std::size_t>(c)] = model.covariance(r, c);
    cov.push_back(row);
  }
  j["covariance"] = std::move(cov);
  j["mode"] = model.mode == CovarianceMode::kDiagonal ? "diagonal" : "full";
  j["fit_count"] = model.fit_count;
  j["label"] = model.label ? json(*model.label) : json(nullptr);
  return j;
}

GaussianPatchModel model_from_json(const json& j) {
  GaussianPatchModel m;
  m.dims = j.at("dims").get<std::vector<std::string>>();
  for (const auto& name : m.dims) parameter_index(name);
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
  const auto d = static_cast<Eigen::Index>(m.dims.size());
  if (static_cast<Eigen::Index>(mean.size()) != d || static_cast<Eigen::Index>(cov.size()) != d) {
    throw std::invalid_argument("model: dimension mismatch");
  }
  m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
  m.covariance.resize(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    if (static_cast<Eigen::Index>(cov[static_cast<std::size_t>(r)].size()) != d) throw std::invalid_argument("model: covariance is not square");
    for (Eigen::Index c = 0; c < d; ++c) m.covariance(r, c) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  m.mode = j.at("mode") == "full" ? CovarianceMode::kFull : CovarianceMode::kDiagonal;
  m.fit_count = j.at("fit_count").get<int>();
  if (j.contains("label") && !j["label"].is_null()) m.label = j["label"].get<std::string>();
  return m;
}

}  // namespace synthmatch
