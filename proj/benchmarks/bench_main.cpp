#include "tweezer/assembler.hpp"
#include "tweezer/hologram.hpp"
#include "tweezer/hungarian.hpp"
#include "tweezer/simulator.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace tweezer;

namespace {

// 7x7 grid at 5 um minus three corners (46 traps), central 5x4 block as targets.
TrapLayout plane46() {
  std::vector<TrapSite> sites;
  for (int j = 0; j < 7; ++j) {
    for (int i = 0; i < 7; ++i) {
      if ((i == 0 && j == 0) || (i == 6 && j == 0) || (i == 0 && j == 6)) {
        continue;
      }
      const bool target = i >= 1 && i <= 5 && j >= 2 && j <= 5;
      sites.push_back({{(i - 3) * 5.0, (j - 3) * 5.0, 0.0}, target, std::nullopt});
    }
  }
  return TrapLayout("plane46", sites);
}

void BM_PlanPlane46(benchmark::State& state) {
  const auto layout = plane46();
  const auto planes = decompose_planes(layout);
  std::mt19937_64 rng(46);
  std::vector<std::size_t> idx(layout.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Occupancy> occupancies;
  for (int k = 0; k < 64; ++k) {
    std::shuffle(idx.begin(), idx.end(), rng);
    Occupancy occ(layout.size(), false);
    for (std::size_t a = 0; a < 23; ++a) {
      occ[idx[a]] = true;
    }
    occupancies.push_back(occ);
  }
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan_plane(occupancies[k++ % occupancies.size()], layout, planes, 0));
  }
}
BENCHMARK(BM_PlanPlane46)->Unit(benchmark::kMicrosecond);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 100);
  CostMatrix cost(n, std::vector<double>(2 * n));
  for (auto& row : cost) {
    for (auto& c : row) {
      c = u(rng);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_assignment(cost));
  }
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNCubed);

void BM_TrapAmplitudes(benchmark::State& state) {
  SlmConfig slm;
  slm.nx = static_cast<int>(state.range(0));
  slm.ny = slm.nx;
  std::vector<Vec3> points;
  for (int j = 0; j < 10; ++j) {
    for (int i = 0; i < 10; ++i) {
      points.push_back({(i - 4.5) * 5.0, (j - 4.5) * 5.0, 0.0});
    }
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 2 * 3.141592653589793);
  PhaseMask mask{slm.nx, slm.ny, std::vector<double>(static_cast<std::size_t>(slm.nx * slm.ny))};
  for (auto& p : mask.phases) {
    p = u(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(trap_amplitudes(mask, points, slm));
  }
}
BENCHMARK(BM_TrapAmplitudes)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_RunShotBilayer(benchmark::State& state) {
  PresetParams p;
  p.counts = {6, 6, 1};
  p.spacing_um = {5, 5, 5};
  p.reservoir_factor = 2.0;
  const ExperimentConfig cfg(generate_preset(Preset::bilayer_square_offset, p));
  std::uint64_t shot = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_shot(cfg, shot++));
  }
}
BENCHMARK(BM_RunShotBilayer)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
