#pragma once

#include "bregman_ot/bench/generator.hpp"
#include "bregman_ot/kernels.hpp"
#include "bregman_ot/outer_solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bregman_ot::bench {

// One experiment: which solver, which kernel, the parameters, the instance
// seed and where the outputs go.
struct RunSpec {
  OuterMethod method = OuterMethod::ibppa;
  KernelKind kernel = KernelKind::entropic;
  bool entropic_conservative_qsp = false;
  double gamma = 1.0;
  double upsilon = 1.0;
  double p = 1.1;
  double sigma = 0.5;
  double kkt_tol = 0;  // 0 means the kernel default (1e-7 quadratic, 1e-5 entropic)
  long max_outer = 50000;
  long max_inner = 0;  // 0 means the kernel default (1000 / 10000)
  Index m = 100;
  Index n = 100;
  std::uint64_t seed = 0;
  std::string trace_csv;     // empty: skip the file
  std::string summary_json;  // empty: skip the file
  double f_reference = std::numeric_limits<double>::quiet_NaN();
  bool zero_time_columns = false;  // blank out wall times for byte-reproducible output
};

BregmanKernel<double> kernel_for(const RunSpec& spec);
OuterConfig<double> config_for(const RunSpec& spec);

OuterMethod parse_method(const std::string& name);
KernelKind parse_kernel(const std::string& name);
const char* method_name(OuterMethod m);
const char* kernel_name(KernelKind k);

std::string trace_to_csv(const SolveTrace& trace, bool zero_time = false);
std::string summary_to_json(const RunSpec& spec, const SolveResult<double>& result);

struct RunOutcome {
  SolveResult<double> result;
  int exit_code = 0;  // 0 converged, 2 cap-truncated
};

// Generates (or accepts) the instance, runs the solver, writes the trace CSV
// and summary JSON.
RunOutcome run_experiment(const RunSpec& spec);
RunOutcome run_experiment(const RunSpec& spec, const OtInstance<double>& inst);

// Runs independent specs on a worker pool; BREGMAN_OT_THREADS caps the
// parallelism (default: hardware concurrency).
std::vector<RunOutcome> run_sweep(const std::vector<RunSpec>& specs);

// The paper-style parameter grid at the given size, one file pair per run
// under out_dir.
std::vector<RunSpec> table_grid(Index m, Index n, std::uint64_t seed, const std::string& out_dir);

int worker_thread_cap();

}  // namespace bregman_ot::bench
