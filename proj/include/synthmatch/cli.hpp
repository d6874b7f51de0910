#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "synthmatch/optim.hpp"
#include "synthmatch/synth.hpp"

namespace synthmatch {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `synthmatch` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchmarkTarget {
  std::string id;
  AudioBuffer audio;
};

struct BenchmarkRow {
  std::string method;
  std::string target;
  double loss = 0.0;
  long evaluations = 0;
  double seconds = 0.0;
};

/// Renders `n` random patches drawn from Rng(seed) with noise seed 0.
std::vector<BenchmarkTarget> synthetic_targets(int n, std::uint64_t seed);

/// Per-run seed, decorrelated from the seed used to draw synthetic targets.
std::uint64_t run_seed(std::uint64_t base, std::size_t method_index, std::size_t target_index);

/// Every method on every target. Rows come back ordered by method, then target.
std::vector<BenchmarkRow> run_benchmark(const std::vector<BenchmarkTarget>& targets,
                                        const std::vector<std::string>& methods, const MethodConfig& cfg,
                                        std::uint64_t seed);

/// Header method,target,loss,evaluations,seconds,accuracy; per-method MEAN rows follow the runs.
std::string benchmark_csv(const std::vector<BenchmarkRow>& rows, const std::vector<std::string>& methods);

}  // namespace synthmatch
