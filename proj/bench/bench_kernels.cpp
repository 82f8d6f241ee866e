// Times the data-parallel kernels with one OpenMP thread (the serial path)
// and with N threads, and checks that both give bit-identical results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polyproj/generators.hpp"
#include "polyproj/grid.hpp"
#include "polyproj/nse.hpp"
#include "polyproj/parallel.hpp"
#include "polyproj/projection.hpp"
#include "polyproj/stokes.hpp"

using namespace polyproj;

namespace {

// A kernel returns its output flattened so runs can be compared bitwise.
using Kernel = std::function<std::vector<double>()>;

std::vector<double> flat(const ScalarField& f) { return {f.values().begin(), f.values().end()}; }
std::vector<double> flat(const MapField& z) { return z.raw(); }
std::vector<double> flat(const VectorField& v) {
  std::vector<double> out;
  for (int c = 0; c < v.grid().dim(); ++c) out.insert(out.end(), v.comp(c).begin(), v.comp(c).end());
  return out;
}

double time_kernel(const Kernel& k, int reps, std::vector<double>& out) {
  out = k();  // warm-up, also fills FFT plan caches
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) out = k();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial versus OpenMP kernel timings"};
  int n = 128;
  int threads = 0;
  int reps = 5;
  app.add_option("--n", n, "cells per side (2D)")->check(CLI::Range(8, 4096));
  app.add_option("--threads", threads, "parallel thread count (0: hardware)")->check(CLI::NonNegativeNumber);
  app.add_option("--reps", reps, "repetitions per measurement")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const Grid g(2, n);
  const MapField z = swirl_map(g, 0.5);
  const VectorField v = stream_velocity(g, "vortex-pair", 0.1);
  const VectorField rough = [&] {
    VectorField w = v;
    w.comp(0)[static_cast<std::size_t>(n) * 3 + 5] += 1.0;
    return w;
  }();
  const ScalarField q(g);
  ProjectionProblem prob(epsilon_family_map(g, 0.05));
  prob.a = 0.1;

  const std::vector<std::pair<std::string, Kernel>> kernels = {
      {"cell_determinant", [&] { return flat(cell_determinant(z)); }},
      {"deformation_gradient_adjoint", [&] { return flat(deformation_gradient_adjoint(deformation_gradient(z))); }},
      {"objective_and_gradient",
       [&] {
         MapField grad(g);
         const double f = objective_and_gradient(z, q, prob, 1.0, &grad);
         std::vector<double> out = flat(grad);
         out.push_back(f);
         return out;
       }},
      {"laplacian_mac", [&] { return flat(laplacian(v)); }},
      {"compose_vector", [&] { return flat(compose(v, z)); }},
      {"compose_inverse", [&] { return flat(compose_inverse(v, z)); }},
      {"leray_project", [&] { return flat(leray_project(rough)); }},
      {"heat_semigroup", [&] { return flat(heat_semigroup(v, 0.05, 1.0 / 64, 4)); }},
      {"projection_solve", [&] { return flat(solve(prob).z_star); }},
  };

  const int par = threads > 0 ? threads : [] {
    set_thread_count(0);
    return thread_count();
  }();
  std::printf("grid %d^2, parallel threads %d, reps %d\n", n, par, reps);
  std::printf("%-30s %12s %12s %9s %s\n", "kernel", "serial [ms]", "omp [ms]", "speedup", "identical");
  bool all_identical = true;
  for (const auto& [name, k] : kernels) {
    const int r = name == "projection_solve" ? 1 : reps;
    std::vector<double> serial_out, par_out;
    set_thread_count(1);
    const double ts = time_kernel(k, r, serial_out);
    set_thread_count(par);
    const double tp = time_kernel(k, r, par_out);
    const bool same = serial_out.size() == par_out.size() &&
                      std::memcmp(serial_out.data(), par_out.data(), serial_out.size() * sizeof(double)) == 0;
    all_identical = all_identical && same;
    std::printf("%-30s %12.3f %12.3f %9.2f %s\n", name.c_str(), 1e3 * ts, 1e3 * tp, ts / tp, same ? "yes" : "NO");
  }
  return all_identical ? 0 : 1;
}
