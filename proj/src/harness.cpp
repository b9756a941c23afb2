#include "bregman_ot/bench/harness.hpp"

#include "bregman_ot/bench/generator.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace bregman_ot::bench {

BregmanKernel<double> kernel_for(const RunSpec& spec) {
  if (spec.kernel == KernelKind::quadratic) return BregmanKernel<double>::quadratic();
  return spec.entropic_conservative_qsp ? BregmanKernel<double>::entropic_conservative()
                                        : BregmanKernel<double>::entropic();
}

OuterConfig<double> config_for(const RunSpec& spec) {
  auto cfg = OuterConfig<double>::defaults_for(kernel_for(spec));
  cfg.gamma = spec.gamma;
  cfg.schedule.upsilon = spec.upsilon;
  cfg.schedule.p = spec.p;
  cfg.sigma = spec.sigma;
  if (spec.kkt_tol > 0) cfg.kkt_tol = spec.kkt_tol;
  if (spec.max_inner > 0) cfg.max_inner_total = spec.max_inner;
  cfg.max_outer = spec.max_outer;
  cfg.f_reference = spec.f_reference;
  return cfg;
}

OuterMethod parse_method(const std::string& name) {
  if (name == "ibppa") return OuterMethod::ibppa;
  if (name == "vibppa") return OuterMethod::vibppa;
  if (name == "hpe") return OuterMethod::hpe;
  if (name == "bhpe") return OuterMethod::bhpe;
  throw std::invalid_argument("unknown method: " + name);
}

KernelKind parse_kernel(const std::string& name) {
  if (name == "quadratic") return KernelKind::quadratic;
  if (name == "entropic") return KernelKind::entropic;
  throw std::invalid_argument("unknown kernel: " + name);
}

const char* method_name(OuterMethod m) {
  switch (m) {
    case OuterMethod::ibppa: return "ibppa";
    case OuterMethod::vibppa: return "vibppa";
    case OuterMethod::hpe: return "hpe";
    default: return "bhpe";
  }
}

const char* kernel_name(KernelKind k) {
  return k == KernelKind::quadratic ? "quadratic" : "entropic";
}

namespace {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool uses_sigma(OuterMethod m) { return m == OuterMethod::hpe || m == OuterMethod::bhpe; }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::string trace_to_csv(const SolveTrace& trace, bool zero_time) {
  std::string out = "outer,k_inner_cum,objective,nfval,kkt,theta,gamma,time_s\n";
  for (const auto& row : trace) {
    out += std::to_string(row.outer);
    out += ',';
    out += std::to_string(row.cum_inner);
    out += ',';
    out += format_full(row.objective);
    out += ',';
    if (std::isfinite(row.nfval)) out += format_full(row.nfval);
    out += ',';
    out += format_full(row.kkt);
    out += ',';
    out += format_full(row.theta);
    out += ',';
    out += format_full(row.gamma);
    out += ',';
    out += format_full(zero_time ? 0.0 : row.wall_time_s);
    out += '\n';
  }
  return out;
}

std::string summary_to_json(const RunSpec& spec, const SolveResult<double>& result) {
  nlohmann::ordered_json j;
  j["method"] = method_name(spec.method);
  j["kernel"] = kernel_name(spec.kernel);
  j["gamma"] = spec.gamma;
  j["upsilon"] = uses_sigma(spec.method) ? nullptr : nlohmann::ordered_json(spec.upsilon);
  j["p"] = uses_sigma(spec.method) ? nullptr : nlohmann::ordered_json(spec.p);
  j["sigma"] = uses_sigma(spec.method) ? nlohmann::ordered_json(spec.sigma) : nullptr;
  j["status"] = to_string(result.status);
  j["outer_iters"] = result.outer_iters;
  j["inner_iters"] = result.inner_iters;
  j["kkt_final"] = result.kkt_final;
  j["objective_final"] = result.objective_final;
  j["time_s"] = spec.zero_time_columns || result.trace.empty()
                    ? 0.0
                    : result.trace.back().wall_time_s;
  return j.dump(2) + "\n";
}

RunOutcome run_experiment(const RunSpec& spec, const OtInstance<double>& inst) {
  const auto kernel = kernel_for(spec);
  const auto cfg = config_for(spec);
  RunOutcome outcome;
  outcome.result = run(inst, spec.method, kernel, cfg);
  outcome.exit_code = outcome.result.status == SolveStatus::converged ? 0 : 2;
  if (!spec.trace_csv.empty())
    write_file(spec.trace_csv, trace_to_csv(outcome.result.trace, spec.zero_time_columns));
  if (!spec.summary_json.empty())
    write_file(spec.summary_json, summary_to_json(spec, outcome.result));
  return outcome;
}

RunOutcome run_experiment(const RunSpec& spec) {
  GenConfig gen;
  gen.m = spec.m;
  gen.n = spec.n;
  gen.seed = spec.seed;
  return run_experiment(spec, generate(gen));
}

int worker_thread_cap() {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) cap = 1;
  if (const char* env = std::getenv("BREGMAN_OT_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) cap = std::min(cap, requested);
  }
  return cap;
}

std::vector<RunOutcome> run_sweep(const std::vector<RunSpec>& specs) {
  std::vector<RunOutcome> outcomes(specs.size());
  const int workers = std::min<int>(worker_thread_cap(), static_cast<int>(specs.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= specs.size()) break;
      outcomes[idx] = run_experiment(specs[idx]);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

std::vector<RunSpec> table_grid(Index m, Index n, std::uint64_t seed,
                                const std::string& out_dir) {
  const std::vector<double> p_values{1.001, 1.01, 1.1, 2.1, 3.1};
  const std::vector<double> upsilons{1.0, 1e-3};
  const std::vector<double> sigmas{0.999, 0.99, 0.9, 0.5, 0.1};
  const std::vector<double> gamma_quadratic{10.0, 1.0, 0.1};
  const std::vector<double> gamma_entropic{1.0, 0.1, 0.01};

  std::vector<RunSpec> specs;
  auto label = [&](const RunSpec& s, int variant) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s/%s_%s_g%g_v%d", out_dir.c_str(), method_name(s.method),
                  kernel_name(s.kernel), s.gamma, variant);
    return std::string(buf);
  };
  int counter = 0;
  auto push = [&](RunSpec s) {
    const std::string base = label(s, counter++);
    s.trace_csv = base + ".csv";
    s.summary_json = base + ".json";
    specs.push_back(std::move(s));
  };

  for (const KernelKind kernel : {KernelKind::quadratic, KernelKind::entropic}) {
    const auto& gammas = kernel == KernelKind::quadratic ? gamma_quadratic : gamma_entropic;
    for (const OuterMethod method : {OuterMethod::ibppa, OuterMethod::vibppa}) {
      for (double gamma : gammas)
        for (double upsilon : upsilons)
          for (double p : p_values) {
            RunSpec s;
            s.method = method;
            s.kernel = kernel;
            s.gamma = gamma;
            s.upsilon = upsilon;
            s.p = p;
            s.m = m;
            s.n = n;
            s.seed = seed;
            push(std::move(s));
          }
    }
    const OuterMethod rel = kernel == KernelKind::quadratic ? OuterMethod::hpe : OuterMethod::bhpe;
    for (double gamma : gammas)
      for (double sigma : sigmas) {
        RunSpec s;
        s.method = rel;
        s.kernel = kernel;
        s.gamma = gamma;
        s.sigma = sigma;
        s.m = m;
        s.n = n;
        s.seed = seed;
        push(std::move(s));
      }
  }
  return specs;
}

}  // namespace bregman_ot::bench
