#include <benchmark/benchmark.h>

#include "ctsdr/refine.hpp"

using namespace ctsdr;

namespace {

TranscribedNlp make_nlp(int n) {
  return transcribe(double_integrator_benchmark(0.5), ShootingGrid{{n, n}});
}

void BM_Transcribe(benchmark::State& state) {
  OcpProblem p = double_integrator_benchmark(0.5);
  ShootingGrid grid{{static_cast<int>(state.range(0)),
                     static_cast<int>(state.range(0))}};
  for (auto _ : state) benchmark::DoNotOptimize(transcribe(p, grid));
}
BENCHMARK(BM_Transcribe)->Arg(5)->Arg(20);

void BM_Assemble(benchmark::State& state) {
  TranscribedNlp nlp = make_nlp(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble(nlp));
}
BENCHMARK(BM_Assemble)->Arg(5)->Arg(10)->Arg(20);

void BM_StandardForm(benchmark::State& state) {
  TranscribedNlp nlp = make_nlp(static_cast<int>(state.range(0)));
  LiftedSdp sdp = assemble(nlp);
  for (auto _ : state) benchmark::DoNotOptimize(standard_form(sdp));
}
BENCHMARK(BM_StandardForm)->Arg(5)->Arg(10);

void BM_SolveSdp(benchmark::State& state) {
  TranscribedNlp nlp = make_nlp(static_cast<int>(state.range(0)));
  ConicProgram prog = standard_form(assemble(nlp)).program;
  for (auto _ : state) benchmark::DoNotOptimize(solve(prog));
}
BENCHMARK(BM_SolveSdp)->Unit(benchmark::kMillisecond)->Arg(5)->Arg(10);

void BM_FixedThetaQp(benchmark::State& state) {
  TranscribedNlp nlp = make_nlp(static_cast<int>(state.range(0)));
  Eigen::VectorXd th(2);
  th << 0.28, 0.12;
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_qp(fixed_theta_qp(nlp, th)));
}
BENCHMARK(BM_FixedThetaQp)->Arg(5)->Arg(10);

void BM_Pipeline(benchmark::State& state) {
  OcpProblem p = double_integrator_benchmark(0.5);
  ShootingGrid grid{{static_cast<int>(state.range(0)),
                     static_cast<int>(state.range(0))}};
  for (auto _ : state) benchmark::DoNotOptimize(solve_pipeline(p, grid));
}
BENCHMARK(BM_Pipeline)->Unit(benchmark::kMillisecond)->Arg(5);

}  // namespace

BENCHMARK_MAIN();
