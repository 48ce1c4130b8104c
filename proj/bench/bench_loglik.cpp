// Serial dense reference vs. the OpenMP kernel on simulated data.
//   bench_loglik [n] [repeats]

#include "gmmtvc/simulation.hpp"

#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace gmmtvc;

namespace {

template <class F>
double time_ms(F&& f, int repeats, double& out) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) out = f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::stoi(argv[1]) : 2000;
    const int repeats = argc > 2 ? std::stoi(argv[2]) : 5;
    SimulationCondition cond = reference_condition(1, 1.0, 2, 1.0);
    cond.n = n;
    const auto data = generate_dataset(cond, 11);
    const ModelSpec spec = truth_spec(cond);
    const Theta theta = truth_theta(cond);

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    double ref = 0.0, fast = 0.0;
    const double t_ref = time_ms([&] { return mixture_loglik_reference(data, theta, spec); }, repeats, ref);
    const double t_fast = time_ms([&] { return mixture_loglik(data, theta, spec); }, repeats, fast);
    std::printf("n=%d K=%d J=%d threads=%d\n", n, spec.classes, cond.waves, threads);
    std::printf("reference  %10.3f ms  loglik %.10f\n", t_ref, ref);
    std::printf("kernel     %10.3f ms  loglik %.10f\n", t_fast, fast);
    std::printf("speedup    %10.2fx  |diff| %.3e\n", t_ref / t_fast, std::abs(ref - fast));
    return std::abs(ref - fast) <= 1e-8 * std::abs(ref) ? 0 : 1;
}
