#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "synthmatch/audio_io.hpp"
#include "synthmatch/cli.hpp"
#include "synthmatch/patch_tools.hpp"

using namespace synthmatch;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "synthmatch_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Patch with(const std::string& name, double physical, std::uint64_t seed = 1) {
  Rng rng(seed);
  Patch p = random_patch(rng);
  const std::size_t i = parameter_index(name);
  p.values[i] = normalize(physical, descriptor_table()[i]);
  return p;
}

double physical(const Patch& p, const std::string& name) {
  const std::size_t i = parameter_index(name);
  return denormalize(p.values[i], descriptor_table()[i]);
}

// Target WAV rendered from a known patch.
fs::path make_target(const fs::path& dir) {
  Rng rng(77);
  const auto audio = render(random_patch(rng));
  const auto path = dir / "target.wav";
  write_wav(path, audio.samples, audio.sample_rate, WavFormat::kFloat32);
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"fit", "--input", "x.wav"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("fit with an unknown method lists the nine valid ones") {
  const auto dir = temp_dir("nosuch");
  const auto r = cli({"fit", "--input", make_target(dir).string(), "--method", "nosuch", "--out", (dir / "p.json").string()});
  CHECK(r.code == kExitUsage);
  for (const auto& m : method_names()) CHECK(r.err.find(m) != std::string::npos);
}

TEST_CASE("fit on a missing input is a runtime error") {
  const auto dir = temp_dir("missing");
  const auto r = cli({"fit", "--input", (dir / "none.wav").string(), "--method", "random_search", "--out",
                      (dir / "p.json").string()});
  CHECK(r.code == kExitRuntime);
}

TEST_CASE("bad config files are usage errors") {
  const auto dir = temp_dir("badcfg");
  std::ofstream(dir / "cfg.json") << R"({"random_search": {"m": 3}})";
  const auto r = cli({"fit", "--input", make_target(dir).string(), "--method", "random_search", "--out",
                      (dir / "p.json").string(), "--config", (dir / "cfg.json").string()});
  CHECK(r.code == kExitUsage);
}

TEST_CASE("fit writes a deterministic patch, a trace and a manifest") {
  const auto dir = temp_dir("fit");
  const auto target = make_target(dir);
  std::ofstream(dir / "cfg.json") << R"({"random_search": {"n": 12}})";
  auto run = [&](const std::string& tag) {
    return cli({"fit", "--input", target.string(), "--method", "random_search", "--seed", "5", "--out",
                (dir / (tag + ".json")).string(), "--trace", (dir / (tag + ".csv")).string(), "--config",
                (dir / "cfg.json").string()});
  };
  REQUIRE(run("a").code == kExitOk);
  REQUIRE(run("b").code == kExitOk);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  const auto loaded = load_patch(dir / "a.json");
  REQUIRE(loaded.meta.loss.has_value());
  CHECK(*loaded.meta.target == "target.wav");
  CHECK(*loaded.patch.source == "random_search");

  const auto trace = slurp(dir / "a.csv");
  CHECK(trace.rfind("iteration,evaluations,best_loss\n", 0) == 0);

  const auto m = nlohmann::json::parse(slurp(dir / "a.json.manifest.json"));
  CHECK(m["command"] == "fit");
  CHECK(m["evaluations"] == 12);
  CHECK(m["method_config"]["n"] == 12);
  for (const char* key : {"argv", "descriptor_table_hash", "inputs", "seeds", "outputs", "wall_clock_seconds"}) {
    CHECK(m.contains(key));
  }

  // The manifest alone reproduces the run.
  std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
  for (auto& a : argv) {
    if (a == (dir / "a.json").string()) a = (dir / "c.json").string();
    if (a == (dir / "a.csv").string()) a = (dir / "c.csv").string();
  }
  REQUIRE(cli(argv).code == kExitOk);
  CHECK(slurp(dir / "c.json") == slurp(dir / "a.json"));
}

TEST_CASE("fit result is no worse than the first random sample") {
  const auto dir = temp_dir("argmin");
  const auto target = make_target(dir);
  std::ofstream(dir / "cfg.json") << R"({"random_search": {"n": 20}})";
  REQUIRE(cli({"fit", "--input", target.string(), "--method", "random_search", "--seed", "3", "--out",
               (dir / "p.json").string(), "--config", (dir / "cfg.json").string()})
              .code == kExitOk);
  const auto fitted = load_patch(dir / "p.json");

  SynthObjective obj(AudioBuffer{read_wav(target).samples, 44100});
  Rng rng(3);
  std::vector<double> first(kNumParams);
  for (auto& v : first) v = rng.uniform();
  CHECK(*fitted.meta.loss <= obj.evaluate(first));
  CHECK(*fitted.meta.loss == doctest::Approx(obj.evaluate(fitted.patch.values)).epsilon(1e-12));
}

TEST_CASE("render writes 88,200 samples, deterministically") {
  const auto dir = temp_dir("render");
  save_patch(with("mixer.noise_level", 0.5), {}, dir / "p.json");
  for (const char* out : {"a.wav", "b.wav"}) {
    REQUIRE(cli({"render", "--patch", (dir / "p.json").string(), "--out", (dir / out).string(), "--noise-seed", "4"}).code ==
            kExitOk);
  }
  CHECK(slurp(dir / "a.wav") == slurp(dir / "b.wav"));
  const auto w = read_wav(dir / "a.wav");
  CHECK(w.samples.size() == 88200);
  CHECK(w.sample_rate == 44100);

  Patch silent = with("mixer.vco_1_level", 0.0);
  for (const char* name : {"mixer.vco_2_level", "mixer.noise_level"}) silent.values[parameter_index(name)] = 0.0;
  save_patch(silent, {}, dir / "silent.json");
  REQUIRE(cli({"render", "--patch", (dir / "silent.json").string(), "--out", (dir / "s.wav").string()}).code == kExitOk);
  for (double v : read_wav(dir / "s.wav").samples) REQUIRE(v == 0.0);
}

TEST_CASE("render reports invalid patches with exit 1") {
  const auto dir = temp_dir("render_bad");
  std::ofstream(dir / "bad.json") << "{}";
  const auto r = cli({"render", "--patch", (dir / "bad.json").string(), "--out", (dir / "x.wav").string()});
  CHECK(r.code == kExitRuntime);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("edit applies flags left to right") {
  const auto dir = temp_dir("edit");
  const auto in = (dir / "in.json").string();
  Patch p = with("keyboard.midi_f0", 60.0);
  p.values[parameter_index("mixer.noise_level")] = 0.8;
  save_patch(p, {"t.wav", 1.0}, in);

  REQUIRE(cli({"edit", "--patch", in, "--pitch-shift", "+5", "--out", (dir / "a.json").string()}).code == kExitOk);
  const auto a = load_patch(dir / "a.json");
  CHECK(physical(a.patch, "keyboard.midi_f0") == doctest::Approx(65.0).epsilon(1e-12));
  CHECK(*a.patch.source == "edited");
  CHECK_FALSE(a.meta.loss.has_value());

  REQUIRE(cli({"edit", "--patch", in, "--denoise", "--denoise", "--out", (dir / "b.json").string()}).code == kExitOk);
  REQUIRE(cli({"edit", "--patch", in, "--denoise", "--out", (dir / "c.json").string()}).code == kExitOk);
  CHECK(load_patch(dir / "b.json").patch == load_patch(dir / "c.json").patch);

  // Clamping makes the order observable: +10 then -10 from 125 lands on 117, the reverse on 125.
  save_patch(with("keyboard.midi_f0", 125.0), {}, in);
  REQUIRE(cli({"edit", "--patch", in, "--pitch-shift", "10", "--pitch-shift", "-10", "--out", (dir / "d.json").string()})
              .code == kExitOk);
  CHECK(physical(load_patch(dir / "d.json").patch, "keyboard.midi_f0") == doctest::Approx(117.0).epsilon(1e-12));
  REQUIRE(cli({"edit", "--patch", in, "--pitch-shift", "-10", "--pitch-shift", "10", "--out", (dir / "e.json").string()})
              .code == kExitOk);
  CHECK(physical(load_patch(dir / "e.json").patch, "keyboard.midi_f0") == doctest::Approx(125.0).epsilon(1e-12));

  save_patch(with("adsr_2.attack", 1.0), {}, in);
  REQUIRE(cli({"edit", "--patch", in, "--scale-env", "adsr_2:attack:0.5", "--out", (dir / "f.json").string()}).code ==
          kExitOk);
  CHECK(physical(load_patch(dir / "f.json").patch, "adsr_2.attack") == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("edit errors") {
  const auto dir = temp_dir("edit_bad");
  const auto in = (dir / "in.json").string();
  save_patch(with("keyboard.midi_f0", 60.0), {}, in);
  CHECK(cli({"edit", "--patch", in, "--out", (dir / "o.json").string()}).code == kExitUsage);
  const auto r = cli({"edit", "--patch", in, "--scale-env", "adsr_9:attack:0.5", "--out", (dir / "o.json").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("adsr_9") != std::string::npos);
  CHECK(cli({"edit", "--patch", in, "--scale-env", "adsr_1:attack", "--out", (dir / "o.json").string()}).code ==
        kExitUsage);
}

TEST_CASE("analyze emits one row per patch with labels") {
  const auto dir = temp_dir("analyze");
  for (int i = 0; i < 3; ++i) {
    Patch p = with("keyboard.midi_f0", 40.0 + i, static_cast<std::uint64_t>(i));
    p.label = "cat";
    save_patch(p, {}, dir / ("p" + std::to_string(i) + ".json"));
  }
  const auto out = dir / "features.csv";
  REQUIRE(cli({"analyze", "--patches", dir.string(), "--out", out.string()}).code == kExitOk);
  const auto csv = slurp(out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("\ncat,40,") != std::string::npos);

  const auto empty = temp_dir("analyze_empty");
  CHECK(cli({"analyze", "--patches", empty.string(), "--out", (empty / "f.csv").string()}).code == kExitRuntime);
}

TEST_CASE("generate writes n patches, n WAVs, a model and a manifest") {
  const auto src = temp_dir("gen_src");
  for (int i = 0; i < 4; ++i) {
    Rng rng(static_cast<std::uint64_t>(i) + 10);
    Patch p = random_patch(rng);
    p.label = "dog";
    save_patch(p, {}, src / ("p" + std::to_string(i) + ".json"));
  }
  const auto out1 = temp_dir("gen_out1"), out2 = temp_dir("gen_out2");
  for (const auto& out : {out1, out2}) {
    REQUIRE(cli({"generate", "--patches", src.string(), "--n", "5", "--out-dir", out.string(), "--seed", "8"}).code ==
            kExitOk);
  }
  int jsons = 0, wavs = 0;
  for (const auto& e : fs::directory_iterator(out1)) {
    const auto name = e.path().filename().string();
    if (name.rfind("sample_", 0) != 0) continue;
    if (e.path().extension() == ".json") {
      ++jsons;
      const auto p = load_patch(e.path());
      CHECK(validate_patch(p.patch).empty());
      CHECK(*p.patch.label == "dog");
    } else if (e.path().extension() == ".wav") {
      ++wavs;
      CHECK(read_wav(e.path()).samples.size() == 88200);
    }
    CHECK(slurp(e.path()) == slurp(out2 / name));
  }
  CHECK(jsons == 5);
  CHECK(wavs == 5);
  CHECK(fs::exists(out1 / "model.json"));
  CHECK(fs::exists(out1 / "manifest.json"));
  CHECK(fs::exists(out1 / "sample_000.json"));

  const auto sub = temp_dir("gen_sub");
  REQUIRE(cli({"generate", "--patches", src.string(), "--n", "3", "--dims", "f0dur", "--out-dir", sub.string()}).code ==
          kExitOk);
  const auto model = nlohmann::json::parse(slurp(sub / "model.json"));
  CHECK(model["dims"].size() == 2);

  const auto lonely = temp_dir("gen_one");
  save_patch(with("keyboard.midi_f0", 50.0), {}, lonely / "only.json");
  CHECK(cli({"generate", "--patches", lonely.string(), "--out-dir", (lonely / "o").string()}).code == kExitRuntime);
  CHECK(cli({"generate", "--patches", src.string(), "--dims", "some", "--out-dir", (lonely / "o").string()}).code ==
        kExitUsage);
}

TEST_CASE("params prints the descriptor table") {
  const auto r = cli({"params"});
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.size() == kNumParams);
}

TEST_CASE("benchmark CSV layout and determinism") {
  const auto dir = temp_dir("bench");
  std::ofstream(dir / "cfg.json") << R"({"random_search": {"n": 3}, "tpe": {"trials": 3, "startup": 3}})";
  auto run = [&](const std::string& out) {
    return cli({"benchmark", "--synthetic", "2", "--seed", "7", "--methods", "random_search,tpe", "--out",
                (dir / out).string(), "--config", (dir / "cfg.json").string()});
  };
  REQUIRE(run("a.csv").code == kExitOk);
  REQUIRE(run("b.csv").code == kExitOk);

  auto strip_seconds = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#') {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        if (f.size() == 6) f[4] = "";
        line.clear();
        for (const auto& c : f) line += c + ",";
      }
      out += line + "\n";
    }
    return out;
  };
  const auto a = slurp(dir / "a.csv");
  CHECK(strip_seconds(a) == strip_seconds(slurp(dir / "b.csv")));
  CHECK(a.rfind("method,target,loss,evaluations,seconds,accuracy\n", 0) == 0);
  CHECK(a.find("random_search,synthetic_000,") != std::string::npos);
  CHECK(a.find("tpe,synthetic_001,") != std::string::npos);
  CHECK(a.find("random_search,MEAN,") != std::string::npos);
  CHECK(a.find(",n/a") != std::string::npos);

  CHECK(cli({"benchmark", "--synthetic", "1", "--methods", "hill", "--out", (dir / "c.csv").string()}).code == kExitUsage);
  const auto empty = temp_dir("bench_empty");
  CHECK(cli({"benchmark", "--dataset", empty.string(), "--out", (dir / "d.csv").string()}).code == kExitRuntime);
}

TEST_CASE("benchmark rows and run seeds") {
  const auto targets = synthetic_targets(2, 4);
  REQUIRE(targets.size() == 2);
  CHECK(targets[0].id == "synthetic_000");
  CHECK(targets[0].audio.samples.size() == 88200);
  CHECK(synthetic_targets(2, 4)[1].audio == targets[1].audio);

  CHECK(run_seed(1, 0, 0) != run_seed(1, 0, 1));
  CHECK(run_seed(1, 0, 1) != run_seed(1, 1, 0));
  CHECK(run_seed(4, 0, 0) != 4);

  MethodConfig cfg;
  cfg.random_search.n = 2;
  const auto rows = run_benchmark(targets, {"random_search"}, cfg, 4);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].target == "synthetic_000");
  CHECK(rows[1].evaluations == 2);
  const auto csv = benchmark_csv(rows, {"random_search"});
  CHECK(csv.find("random_search,MEAN,") != std::string::npos);
}
