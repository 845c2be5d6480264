// Serial reference loops against the OpenMP kernels.

#include "stochdom/estimate.hpp"
#include "stochdom/problems.hpp"
#include "stochdom/uq.hpp"

#include <benchmark/benchmark.h>

using namespace stochdom;

namespace {

struct Setup {
    ProblemSetup problem = square_setup("convection-diffusion-square");
    std::shared_ptr<const Partition> partition =
        std::make_shared<const Partition>(build_partition(problem.reference, problem.partition));
    PerturbationModel model = PerturbationModel::uniform_box(partition->num_boundary_nodes, problem.half_width);
};

const Setup& setup()
{
    static const Setup s;
    return s;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

std::shared_ptr<const TransformedCoefficients> coeffs(long long index)
{
    const Setup& s = setup();
    const auto smp = sample_perturbation(s.model, *s.partition, 0, index);
    return std::make_shared<const TransformedCoefficients>(s.problem.data, affine_maps(*s.partition, smp), s.partition);
}

void BM_Assembly(benchmark::State& state)
{
    const auto space = make_space(uniform_mesh(*setup().partition, 0.25, 2), 2);
    const auto tc = coeffs(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(assemble_operator(*space, *tc, true, {false, exec_of(state)}));
    }
    state.SetLabel(exec_of(state) == Exec::Serial ? "serial" : "parallel");
}

void BM_SpMV(benchmark::State& state)
{
    const auto space = make_space(uniform_mesh(*setup().partition, 0.125, 2), 1);
    const CsrMatrix a = assemble_operator(*space, *coeffs(1), true);
    std::vector<double> x(a.cols, 1.0), y;
    for (auto _ : state) {
        a.multiply(x, y, exec_of(state));
        benchmark::DoNotOptimize(y.data());
    }
    state.SetLabel(exec_of(state) == Exec::Serial ? "serial" : "parallel");
}

void BM_Estimate(benchmark::State& state)
{
    const TriMesh mesh = uniform_mesh(*setup().partition, 0.25, 2);
    const auto tc = coeffs(2);
    const Field u = solve(assemble(make_space(mesh, 1), *tc, true));
    const Field eta = solve_adjoint(make_space(mesh, 2), *tc, true);
    for (auto _ : state) {
        benchmark::DoNotOptimize(error_estimate(u, eta, *tc, true, exec_of(state)));
    }
    state.SetLabel(exec_of(state) == Exec::Serial ? "serial" : "parallel");
}

void BM_MonteCarlo(benchmark::State& state)
{
    const Setup& s = setup();
    const auto space = make_space(uniform_mesh(*s.partition, 1.0, s.problem.base_levels), 1);
    McConfig c;
    c.num_samples = 32;
    c.exec = exec_of(state);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_mc(c, s.model, s.partition, s.problem.data, space));
    }
    state.SetLabel(exec_of(state) == Exec::Serial ? "serial" : "parallel");
}

} // namespace

BENCHMARK(BM_Assembly)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SpMV)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Estimate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
