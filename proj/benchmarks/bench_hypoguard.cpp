#include <benchmark/benchmark.h>

#include <random>

#include <Eigen/Core>

#include "hypoguard/distributions.hpp"
#include "hypoguard/graphical_lasso.hpp"
#include "hypoguard/random.hpp"
#include "hypoguard/rare_event.hpp"
#include "hypoguard/simulator.hpp"

namespace {

using namespace hypoguard;

void BM_Rollout12h(benchmark::State& state) {
  const PhysParams p;
  PidConfig pid;
  pid.basal_rate = p.equilibrium_basal();
  const SimConfig sim;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const ScenarioSample s{p, 60.0, 12.0, seed++};
    benchmark::DoNotOptimize(simulate_min_bg(s, pid, sim));
  }
  state.counters["rollouts/s"] =
      benchmark::Counter(static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Rollout12h);

void BM_RolloutWithTrace(benchmark::State& state) {
  const PhysParams p;
  PidConfig pid;
  pid.basal_rate = p.equilibrium_basal();
  const SimConfig sim;
  for (auto _ : state) {
    const Rollout r = rollout({p, 60.0, 12.0, 7}, pid, sim);
    benchmark::DoNotOptimize(r.min_bg);
  }
}
BENCHMARK(BM_RolloutWithTrace);

// One CE iteration on a cheap analytic risk isolates the sampler overhead.
void BM_CrossEntropyIteration(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const GaussianMeanFamily family(Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d), 1.0);
  const RiskFn risk = [](const Eigen::VectorXd& z, std::uint64_t) { return z.sum(); };
  CeConfig cfg;
  cfg.gamma = -3.0;
  cfg.batch_sizes = {1000};
  cfg.iterations = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(cross_entropy_train(family, risk, cfg, {seed++, 1}));
}
BENCHMARK(BM_CrossEntropyIteration)->Arg(1)->Arg(15);

void BM_GraphicalLasso(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  Rng rng(42);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(4 * d, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(x.rows());
  for (auto _ : state) benchmark::DoNotOptimize(graphical_lasso(S, 0.1));
}
BENCHMARK(BM_GraphicalLasso)->Arg(3)->Arg(13)->Arg(30);

}  // namespace
BENCHMARK_MAIN();
