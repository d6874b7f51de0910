#include "synthmatch/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "synthmatch/audio_io.hpp"
#include "synthmatch/patch_tools.hpp"

namespace synthmatch {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Raised for bad flag values found after CLI11 has accepted the command line.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

ordered_json manifest(const std::string& command, const std::vector<std::string>& args) {
  ordered_json m;
  m["command"] = command;
  m["argv"] = args;
  m["descriptor_table_hash"] = descriptor_table_hash();
  return m;
}

void save_manifest(ordered_json m, const fs::path& path, double seconds) {
  m["wall_clock_seconds"] = seconds;
  write_text(path, m.dump(2) + "\n");
}

// Loads the method configuration: defaults, optionally scaled, then the JSON overrides.
MethodConfig load_method_config(const std::string& config_path, double scale) {
  if (!(scale > 0.0)) throw UsageError("--budget-scale must be positive");
  MethodConfig cfg = scale == 1.0 ? MethodConfig{} : MethodConfig{}.scaled(scale);
  if (!config_path.empty()) cfg = method_config_from_json(read_json(config_path), cfg);
  cfg.check();
  return cfg;
}

AudioBuffer load_target(const fs::path& path, const RenderConfig& rc) {
  const WavData wav = read_wav(path);
  std::vector<double> x = wav.sample_rate == rc.sample_rate ? wav.samples : resample(wav.samples, wav.sample_rate, rc.sample_rate);
  return {fix_length(x, rc.num_samples()), rc.sample_rate};
}

std::vector<std::string> parse_methods(const std::string& spec) {
  if (spec == "all") return method_names();
  std::vector<std::string> out;
  std::stringstream ss(spec);
  for (std::string m; std::getline(ss, m, ',');) {
    if (m.empty()) continue;
    check_method_name(m);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw UsageError("--methods names no method");
  return out;
}

std::vector<Patch> load_patch_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<Patch> patches;
  for (const auto& f : list_patch_files(dir)) patches.push_back(load_patch(f).patch);
  return patches;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string input, method, out, trace, config;
  std::uint64_t seed = 0;
  double scale = 1.0;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  check_method_name(a.method);
  const MethodConfig cfg = load_method_config(a.config, a.scale);
  const Stopwatch clock;
  const RenderConfig rc;
  const AudioBuffer target = load_target(a.input, rc);
  const std::string target_id = fs::path(a.input).filename().string();

  const OptimizerResult r = run_method(a.method, target, cfg, a.seed, target_id);
  save_patch(r.best, {target_id, r.best_loss}, a.out);
  if (!a.trace.empty()) write_text(a.trace, trace_csv(r.trace));

  ordered_json m = manifest("fit", argv);
  m["inputs"] = {{"wav", a.input}};
  m["method"] = a.method;
  m["method_config"] = to_json(cfg)[a.method];
  m["seeds"] = {{"optimizer", a.seed}, {"render_noise", rc.noise_seed}};
  m["outputs"] = {{"patch", a.out}, {"trace", a.trace.empty() ? json(nullptr) : json(a.trace)}};
  m["evaluations"] = r.evaluations;
  m["loss"] = r.best_loss;
  save_manifest(std::move(m), manifest_path(a.out), clock.seconds());
  out << a.method << ": loss " << format_double(r.best_loss) << " after " << r.evaluations << " evaluations\n";
  return kExitOk;
}

struct RenderArgs {
  std::string patch, out;
  std::uint64_t noise_seed = 0;
};

int cmd_render(const RenderArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const Stopwatch clock;
  const LoadedPatch lp = load_patch(a.patch);
  if (const auto v = validate_patch(lp.patch); !v.empty()) {
    std::string report = "invalid patch " + a.patch + ":";
    for (const auto& e : v) report += "\n  " + e.message;
    throw DomainError(report);
  }
  RenderConfig rc;
  rc.noise_seed = a.noise_seed;
  const AudioBuffer audio = render(lp.patch, rc);
  write_wav(a.out, audio.samples, audio.sample_rate);

  ordered_json m = manifest("render", argv);
  m["inputs"] = {{"patch", a.patch}};
  m["seeds"] = {{"render_noise", a.noise_seed}};
  m["outputs"] = {{"wav", a.out}};
  save_manifest(std::move(m), manifest_path(a.out), clock.seconds());
  out << "wrote " << audio.samples.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

struct EditArgs {
  std::string patch, out;
  std::vector<double> pitch_shifts;
  std::vector<std::string> scale_envs;
};

// "adsr:field:factor"
Patch apply_scale_env(const Patch& p, const std::string& spec) {
  const auto c1 = spec.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : spec.find(':', c1 + 1);
  if (c2 == std::string::npos) throw UsageError("--scale-env expects adsr:field:factor, got '" + spec + "'");
  double factor = 0.0;
  try {
    std::size_t used = 0;
    factor = std::stod(spec.substr(c2 + 1), &used);
    if (used != spec.size() - c2 - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw UsageError("--scale-env: bad factor in '" + spec + "'");
  }
  try {
    return scale_envelope(p, spec.substr(0, c1), spec.substr(c1 + 1, c2 - c1 - 1), factor);
  } catch (const DomainError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--scale-env: ") + e.what());
  }
}

int cmd_edit(const EditArgs& a, const std::vector<const CLI::Option*>& order, const std::vector<std::string>& argv,
             std::ostream& out) {
  const Stopwatch clock;
  LoadedPatch lp = load_patch(a.patch);
  Patch p = lp.patch;
  std::size_t next_pitch = 0, next_env = 0;
  std::vector<std::string> applied;
  for (const CLI::Option* opt : order) {
    const std::string name = opt->get_name();
    if (name == "--pitch-shift") {
      const double s = a.pitch_shifts.at(next_pitch++);
      p = pitch_shift(p, s);
      applied.push_back("pitch-shift " + format_double(s));
    } else if (name == "--denoise") {
      p = denoise(p);
      applied.push_back("denoise");
    } else if (name == "--scale-env") {
      const std::string& spec = a.scale_envs.at(next_env++);
      p = apply_scale_env(p, spec);
      applied.push_back("scale-env " + spec);
    }
  }
  if (applied.empty()) throw UsageError("edit needs at least one of --pitch-shift, --denoise, --scale-env");
  p.source = "edited";
  // A stored loss described the unedited sound.
  save_patch(p, {lp.meta.target, std::nullopt}, a.out);

  ordered_json m = manifest("edit", argv);
  m["inputs"] = {{"patch", a.patch}};
  m["edits"] = applied;
  m["outputs"] = {{"patch", a.out}};
  save_manifest(std::move(m), manifest_path(a.out), clock.seconds());
  out << "applied " << applied.size() << " edit(s); wrote " << a.out << "\n";
  return kExitOk;
}

struct BenchmarkArgs {
  std::string dataset, methods = "all", out, config;
  int synthetic = 0;
  std::uint64_t seed = 0;
  double scale = 1.0;
};

int cmd_benchmark(const BenchmarkArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.dataset.empty() == (a.synthetic == 0)) throw UsageError("benchmark needs exactly one of --dataset or --synthetic");
  const std::vector<std::string> methods = parse_methods(a.methods);
  const MethodConfig cfg = load_method_config(a.config, a.scale);
  const Stopwatch clock;

  std::vector<BenchmarkTarget> targets;
  std::vector<std::string> inputs;
  if (!a.dataset.empty()) {
    if (!fs::is_directory(a.dataset)) throw std::runtime_error("not a directory: " + a.dataset);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.dataset)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      targets.push_back({f.filename().string(), load_target(f, RenderConfig{})});
      inputs.push_back(f.string());
    }
    if (targets.empty()) throw std::runtime_error("no .wav files in " + a.dataset);
  } else {
    if (a.synthetic < 0) throw UsageError("--synthetic must be positive");
    targets = synthetic_targets(a.synthetic, a.seed);
  }

  const auto rows = run_benchmark(targets, methods, cfg, a.seed);
  write_text(a.out, benchmark_csv(rows, methods));

  ordered_json m = manifest("benchmark", argv);
  m["inputs"] = a.dataset.empty() ? ordered_json{{"synthetic", a.synthetic}} : ordered_json{{"dataset", a.dataset}, {"files", inputs}};
  m["methods"] = methods;
  ordered_json used;
  const ordered_json all = to_json(cfg);
  for (const auto& name : methods) used[name] = all[name];
  m["method_config"] = used;
  m["seeds"] = {{"base", a.seed}};
  m["outputs"] = {{"csv", a.out}};
  m["evaluations"] = std::accumulate(rows.begin(), rows.end(), 0L, [](long s, const BenchmarkRow& r) { return s + r.evaluations; });
  save_manifest(std::move(m), manifest_path(a.out), clock.seconds());
  out << rows.size() << " runs (" << methods.size() << " methods x " << targets.size() << " targets); wrote " << a.out << "\n";
  return kExitOk;
}

int cmd_analyze(const std::string& dir, const std::string& out_path, const std::vector<std::string>& argv,
                std::ostream& out) {
  const Stopwatch clock;
  const auto patches = load_patch_dir(dir);
  if (patches.empty()) throw std::runtime_error("no patch files in " + dir);
  write_text(out_path, features_csv(extract_features(patches)));
  ordered_json m = manifest("analyze", argv);
  m["inputs"] = {{"patches", dir}, {"count", patches.size()}};
  m["outputs"] = {{"csv", out_path}};
  save_manifest(std::move(m), manifest_path(out_path), clock.seconds());
  out << "wrote features for " << patches.size() << " patches to " << out_path << "\n";
  return kExitOk;
}

struct GenerateArgs {
  std::string patches, out_dir, dims = "all", covariance = "diagonal";
  int n = 100;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.n < 1) throw UsageError("--n must be at least 1");
  const Stopwatch clock;
  const auto patches = load_patch_dir(a.patches);
  if (patches.size() < 2) {
    throw std::runtime_error("generate needs at least 2 patches in " + a.patches + ", found " + std::to_string(patches.size()));
  }
  const std::vector<std::string> dims = a.dims == "f0dur" ? f0_duration_dims() : std::vector<std::string>{};
  const CovarianceMode mode = a.covariance == "full" ? CovarianceMode::kFull : CovarianceMode::kDiagonal;
  const GaussianPatchModel model = fit_gaussian(patches, dims, mode);
  Rng rng(a.seed);
  const auto samples = sample_patches(model, patches, static_cast<std::size_t>(a.n), rng);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const int width = std::max(3, static_cast<int>(std::to_string(a.n - 1).size()));
  const RenderConfig rc;
  std::vector<std::string> written;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%0*zu", width, i);
    save_patch(samples[i], {}, dir / (std::string(stem) + ".json"));
    const AudioBuffer audio = render(samples[i], rc);
    write_wav(dir / (std::string(stem) + ".wav"), audio.samples, audio.sample_rate);
    written.push_back(stem);
  }
  write_text(dir / "model.json", model_to_json(model).dump(2) + "\n");

  ordered_json m = manifest("generate", argv);
  m["inputs"] = {{"patches", a.patches}, {"count", patches.size()}};
  m["dims"] = a.dims;
  m["covariance"] = a.covariance;
  m["seeds"] = {{"sampling", a.seed}, {"render_noise", rc.noise_seed}};
  m["outputs"] = {{"dir", a.out_dir}, {"model", "model.json"}, {"samples", written}};
  save_manifest(std::move(m), dir / "manifest.json", clock.seconds());
  out << "wrote " << samples.size() << " patches and WAVs to " << a.out_dir << "\n";
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<BenchmarkTarget> synthetic_targets(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BenchmarkTarget> targets;
  for (int i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synthetic_%03d", i);
    targets.push_back({id, render(random_patch(rng), RenderConfig{})});
  }
  return targets;
}

std::uint64_t run_seed(std::uint64_t base, std::size_t method_index, std::size_t target_index) {
  // splitmix64 finalizer over a combined key.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (1 + method_index * 1000003ULL + target_index);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<BenchmarkRow> run_benchmark(const std::vector<BenchmarkTarget>& targets,
                                        const std::vector<std::string>& methods, const MethodConfig& cfg,
                                        std::uint64_t seed) {
  for (const auto& m : methods) check_method_name(m);
  const auto& all = method_names();
  std::vector<BenchmarkRow> rows;
  for (const auto& m : methods) {
    const auto mi = static_cast<std::size_t>(std::find(all.begin(), all.end(), m) - all.begin());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const Stopwatch clock;
      const auto r = run_method(m, targets[t].audio, cfg, run_seed(seed, mi, t), targets[t].id);
      rows.push_back({m, targets[t].id, r.best_loss, r.evaluations, clock.seconds()});
    }
  }
  return rows;
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows, const std::vector<std::string>& methods) {
  std::ostringstream out;
  out << "method,target,loss,evaluations,seconds,accuracy\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.target << ',' << format_double(r.loss) << ',' << r.evaluations << ','
        << format_double(r.seconds) << ",n/a\n";
  }
  for (const auto& m : methods) {
    double loss = 0.0, evals = 0.0, secs = 0.0;
    int count = 0;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      loss += r.loss;
      evals += static_cast<double>(r.evaluations);
      secs += r.seconds;
      ++count;
    }
    if (count == 0) continue;
    out << m << ",MEAN," << format_double(loss / count) << ',' << format_double(evals / count) << ','
        << format_double(secs / count) << ",n/a\n";
  }
  out << "# accuracy: classifier evaluation is out of scope for this tool\n";
  out << "# seconds: wall-clock per run; the only column that varies between identical invocations\n";
  return out.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sound matching for a 78-parameter modular synthesizer"};
  app.name("synthmatch");
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Match a WAV file with one optimizer");
  fit_cmd->add_option("--input", fit.input, "Target WAV")->required();
  fit_cmd->add_option("--method", fit.method, "Optimizer name")->required();
  fit_cmd->add_option("--seed", fit.seed, "Optimizer seed");
  fit_cmd->add_option("--out", fit.out, "Output patch JSON")->required();
  fit_cmd->add_option("--trace", fit.trace, "Best-so-far trace CSV");
  fit_cmd->add_option("--config", fit.config, "JSON overrides keyed by method name");
  fit_cmd->add_option("--budget-scale", fit.scale, "Multiply iteration budgets by this factor");

  RenderArgs rend;
  auto* render_cmd = app.add_subcommand("render", "Render a patch to a 2 s WAV");
  render_cmd->add_option("--patch", rend.patch, "Patch JSON")->required();
  render_cmd->add_option("--out", rend.out, "Output WAV")->required();
  render_cmd->add_option("--noise-seed", rend.noise_seed, "Seed of the noise source");

  EditArgs edit;
  auto* edit_cmd = app.add_subcommand("edit", "Apply edits left to right");
  edit_cmd->add_option("--patch", edit.patch, "Input patch JSON")->required();
  edit_cmd->add_option("--out", edit.out, "Output patch JSON")->required();
  edit_cmd->add_option("--pitch-shift", edit.pitch_shifts, "Semitones")->allow_extra_args(false)->take_all();
  edit_cmd->add_flag("--denoise", "Silence the noise source")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  edit_cmd->add_option("--scale-env", edit.scale_envs, "adsr:field:factor")->allow_extra_args(false)->take_all();

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run methods over a set of targets");
  bench_cmd->add_option("--dataset", bench.dataset, "Directory of WAV targets");
  bench_cmd->add_option("--synthetic", bench.synthetic, "Number of random-patch targets");
  bench_cmd->add_option("--seed", bench.seed, "Base seed");
  bench_cmd->add_option("--methods", bench.methods, "'all' or a comma-separated list");
  bench_cmd->add_option("--out", bench.out, "Results CSV")->required();
  bench_cmd->add_option("--config", bench.config, "JSON overrides keyed by method name");
  bench_cmd->add_option("--budget-scale", bench.scale, "Multiply iteration budgets by this factor");

  std::string analyze_dir, analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Export per-patch features");
  analyze_cmd->add_option("--patches", analyze_dir, "Directory of patch files")->required();
  analyze_cmd->add_option("--out", analyze_out, "Features CSV")->required();

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Fit a Gaussian to patches and sample new sounds");
  gen_cmd->add_option("--patches", gen.patches, "Directory of patch files")->required();
  gen_cmd->add_option("--n", gen.n, "Number of samples");
  gen_cmd->add_option("--dims", gen.dims, "all or f0dur")->check(CLI::IsMember({"all", "f0dur"}));
  gen_cmd->add_option("--covariance", gen.covariance, "diagonal or full")->check(CLI::IsMember({"diagonal", "full"}));
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Sampling seed");

  std::string params_out;
  auto* params_cmd = app.add_subcommand("params", "Print the parameter descriptor table as JSON");
  params_cmd->add_option("--out", params_out, "Write to a file instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, args, out);
    if (*render_cmd) return cmd_render(rend, args, out);
    if (*edit_cmd) {
      std::vector<const CLI::Option*> order;
      for (const CLI::Option* o : edit_cmd->parse_order()) order.push_back(o);
      return cmd_edit(edit, order, args, out);
    }
    if (*bench_cmd) return cmd_benchmark(bench, args, out);
    if (*analyze_cmd) return cmd_analyze(analyze_dir, analyze_out, args, out);
    if (*gen_cmd) return cmd_generate(gen, args, out);
    if (*params_cmd) {
      const std::string table = descriptor_table_json() + "\n";
      if (params_out.empty()) out << table;
      else write_text(params_out, table);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnknownMethod& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    // Method configuration values are validated after parsing.
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace synthmatch
