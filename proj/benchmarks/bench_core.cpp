#include <benchmark/benchmark.h>

#include <random>

#include "demoproc/calib.hpp"
#include "demoproc/demolog.hpp"
#include "demoproc/geom.hpp"
#include "demoproc/kinchain.hpp"
#include "demoproc/synthgen.hpp"
#include "demoproc/trajeval.hpp"

using namespace demoproc;

namespace {

geom::Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return {geom::Rotation::from_rotation_vector({n(rng), n(rng), n(rng)}), {n(rng), n(rng), n(rng)}};
}

std::vector<demolog::PoseSample> random_trajectory(std::mt19937_64& rng, std::size_t n) {
  std::vector<demolog::PoseSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({i * 33'333'333ULL, random_pose(rng)});
  return out;
}

void BM_Compose(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto a = random_pose(rng);
  auto b = random_pose(rng);
  for (auto _ : state) {
    b = geom::compose(a, b);
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_Compose);

void BM_Ape(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pair = trajeval::associate(random_trajectory(rng, n), random_trajectory(rng, n), 0);
  for (auto _ : state) benchmark::DoNotOptimize(trajeval::ape(pair));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ape)->Arg(1000)->Arg(100000);

void BM_Rpe(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto pair = trajeval::associate(random_trajectory(rng, n), random_trajectory(rng, n), 0);
  for (auto _ : state) benchmark::DoNotOptimize(trajeval::rpe(pair, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Rpe)->Arg(1000)->Arg(100000);

void BM_HandEye(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto x = random_pose(rng);
  std::vector<calib::MotionPair> pairs;
  for (int i = 0; i < state.range(0); ++i) {
    const auto a = random_pose(rng);
    pairs.push_back({a, geom::inverse(x) * a * x});
  }
  for (auto _ : state) benchmark::DoNotOptimize(calib::solve_hand_eye(pairs));
}
BENCHMARK(BM_HandEye)->Arg(20)->Arg(200);

void BM_ForwardKinematics(benchmark::State& state) {
  const auto chain = kinchain::parse_chain(synthgen::builtin_arm_urdf(), "base_link", "tool0").chain;
  const std::vector<double> q{0.1, -0.4, 0.9, 0.2, 0.5, -0.3};
  for (auto _ : state) benchmark::DoNotOptimize(kinchain::forward_kinematics(chain, q));
}
BENCHMARK(BM_ForwardKinematics);

void BM_ReadLog(benchmark::State& state) {
  const auto bytes = demolog::encode_log(synthgen::generate(synthgen::default_scenario()).log);
  for (auto _ : state) benchmark::DoNotOptimize(demolog::read_log(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_ReadLog);

}  // namespace

BENCHMARK_MAIN();
