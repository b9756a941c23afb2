// Benchmark harness for the Bregman proximal point OT solvers: instance
// generation, single runs, parameter sweeps and the exact tiny-instance oracle.

#include "bregman_ot/bench/generator.hpp"
#include "bregman_ot/bench/harness.hpp"
#include "bregman_ot/bench/lp_oracle.hpp"
#include "bregman_ot/core.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ot = bregman_ot;
namespace bench = bregman_ot::bench;

namespace {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open instance file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string instance_to_json(const ot::OtInstance<double>& inst) {
  nlohmann::ordered_json j;
  j["m"] = inst.rows();
  j["n"] = inst.cols();
  j["a"] = std::vector<double>(inst.a.data(), inst.a.data() + inst.a.size());
  j["b"] = std::vector<double>(inst.b.data(), inst.b.data() + inst.b.size());
  auto& cost = j["cost"] = nlohmann::ordered_json::array();
  for (ot::Index i = 0; i < inst.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (ot::Index jj = 0; jj < inst.cols(); ++jj) row.push_back(inst.cost(i, jj));
    cost.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string instance_to_csv(const ot::OtInstance<double>& inst) {
  std::string out = std::to_string(inst.rows()) + "," + std::to_string(inst.cols()) + "\n";
  auto append_vector = [&out](const ot::Vector& v) {
    for (ot::Index i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += format_full(v[i]);
    }
    out += '\n';
  };
  append_vector(inst.a);
  append_vector(inst.b);
  for (ot::Index i = 0; i < inst.rows(); ++i) {
    for (ot::Index j = 0; j < inst.cols(); ++j) {
      if (j) out += ',';
      out += format_full(inst.cost(i, j));
    }
    out += '\n';
  }
  return out;
}

std::vector<double> parse_csv_line(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(std::stod(field));
  return out;
}

ot::OtInstance<double> load_instance(const std::string& path) {
  const std::string text = slurp(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  ot::OtInstance<double> inst;
  if (first != std::string::npos && text[first] == '{') {
    const auto j = nlohmann::json::parse(text);
    const ot::Index m = j.at("m").get<ot::Index>();
    const ot::Index n = j.at("n").get<ot::Index>();
    inst.a = ot::Vector(m);
    inst.b = ot::Vector(n);
    for (ot::Index i = 0; i < m; ++i) inst.a[i] = j.at("a").at(i).get<double>();
    for (ot::Index i = 0; i < n; ++i) inst.b[i] = j.at("b").at(i).get<double>();
    inst.cost.resize(m, n);
    for (ot::Index i = 0; i < m; ++i)
      for (ot::Index jj = 0; jj < n; ++jj) inst.cost(i, jj) = j.at("cost").at(i).at(jj).get<double>();
  } else {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw std::runtime_error("empty instance file");
    const auto dims = parse_csv_line(line);
    if (dims.size() != 2) throw std::runtime_error("bad instance header");
    const auto m = static_cast<ot::Index>(dims[0]);
    const auto n = static_cast<ot::Index>(dims[1]);
    std::getline(ss, line);
    const auto av = parse_csv_line(line);
    std::getline(ss, line);
    const auto bv = parse_csv_line(line);
    inst.a = Eigen::Map<const ot::Vector>(av.data(), m);
    inst.b = Eigen::Map<const ot::Vector>(bv.data(), n);
    inst.cost.resize(m, n);
    for (ot::Index i = 0; i < m; ++i) {
      std::getline(ss, line);
      const auto row = parse_csv_line(line);
      if (static_cast<ot::Index>(row.size()) != n) throw std::runtime_error("bad cost row");
      for (ot::Index jj = 0; jj < n; ++jj) inst.cost(i, jj) = row[jj];
    }
  }
  inst.validate();
  return inst;
}

struct CommonOptions {
  long m = 100, n = 100;
  std::uint64_t seed = 0;
  std::string instance_path;
  std::string out;
  std::string format = "csv";
};

void add_instance_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--m", opt.m, "number of source points");
  cmd->add_option("--n", opt.n, "number of target points");
  cmd->add_option("--seed", opt.seed, "generator seed");
  cmd->add_option("--instance", opt.instance_path, "instance file (overrides --m/--n/--seed)");
}

ot::OtInstance<double> resolve_instance(const CommonOptions& opt) {
  if (!opt.instance_path.empty()) return load_instance(opt.instance_path);
  bench::GenConfig gen;
  gen.m = opt.m;
  gen.n = opt.n;
  gen.seed = opt.seed;
  return bench::generate(gen);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bregman proximal point solvers for discrete optimal transport"};
  app.require_subcommand(1);

  // ---- gen ----
  CommonOptions gen_opt;
  auto* gen_cmd = app.add_subcommand("gen", "generate a Gaussian-mixture instance");
  add_instance_options(gen_cmd, gen_opt);
  gen_cmd->add_option("--out", gen_opt.out, "output file (stdout when omitted)");
  gen_cmd->add_option("--format", gen_opt.format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  gen_cmd->set_config("--config");

  // ---- solve ----
  CommonOptions solve_opt;
  std::string method = "ibppa", kernel = "entropic";
  double gamma = 1.0, upsilon = 1.0, p = 1.1, sigma = 0.5, kkt_tol = 0.0;
  double f_reference = std::numeric_limits<double>::quiet_NaN();
  long max_outer = 50000, max_inner = 0;
  bool conservative_qsp = false, no_timing = false;
  auto* solve_cmd = app.add_subcommand("solve", "run one solver configuration");
  add_instance_options(solve_cmd, solve_opt);
  solve_cmd->add_option("--method", method, "ibppa|vibppa|hpe|bhpe")
      ->check(CLI::IsMember({"ibppa", "vibppa", "hpe", "bhpe"}));
  solve_cmd->add_option("--kernel", kernel, "quadratic|entropic")
      ->check(CLI::IsMember({"quadratic", "entropic"}));
  solve_cmd->add_option("--gamma", gamma, "proximal parameter");
  solve_cmd->add_option("--upsilon", upsilon, "tolerance schedule Upsilon");
  solve_cmd->add_option("--p", p, "tolerance schedule exponent");
  solve_cmd->add_option("--sigma", sigma, "HPE/BHPE relative-error constant");
  solve_cmd->add_option("--kkt-tol", kkt_tol, "KKT stopping tolerance (0: kernel default)");
  solve_cmd->add_option("--max-outer", max_outer, "outer iteration cap");
  solve_cmd->add_option("--max-inner", max_inner, "cumulative inner cap (0: kernel default)");
  solve_cmd->add_option("--out", solve_opt.out, "output prefix for <out>.csv and <out>.json");
  solve_cmd->add_option("--format", solve_opt.format, "summary printed as csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  solve_cmd->add_option("--f-ref", f_reference, "reference optimal value for the nfval column");
  solve_cmd->add_flag("--conservative-qsp", conservative_qsp,
                      "entropic kernel with lambda = tau1 = tau2 = 1");
  solve_cmd->add_flag("--no-timing", no_timing, "zero the time columns (byte-reproducible output)");
  solve_cmd->set_config("--config");

  // ---- sweep ----
  CommonOptions sweep_opt;
  bool paper_scale = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "run the full parameter grid");
  add_instance_options(sweep_cmd, sweep_opt);
  sweep_cmd->add_option("--out", sweep_opt.out, "output directory")->required();
  sweep_cmd->add_flag("--paper-scale", paper_scale, "m = n = 500 instead of the desk-scale default");
  sweep_cmd->set_config("--config");

  // ---- oracle ----
  CommonOptions oracle_opt;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact LP solution of a tiny instance");
  add_instance_options(oracle_cmd, oracle_opt);
  oracle_cmd->add_option("--out", oracle_opt.out, "write plan and duals to this file");
  oracle_cmd->add_option("--format", oracle_opt.format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  oracle_cmd->set_config("--config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      const auto inst = resolve_instance(gen_opt);
      const std::string text =
          gen_opt.format == "json" ? instance_to_json(inst) : instance_to_csv(inst);
      if (gen_opt.out.empty())
        std::cout << text;
      else
        write_file(gen_opt.out, text);
      return 0;
    }

    if (solve_cmd->parsed()) {
      bench::RunSpec spec;
      spec.method = bench::parse_method(method);
      spec.kernel = bench::parse_kernel(kernel);
      spec.entropic_conservative_qsp = conservative_qsp;
      spec.gamma = gamma;
      spec.upsilon = upsilon;
      spec.p = p;
      spec.sigma = sigma;
      spec.kkt_tol = kkt_tol;
      spec.max_outer = max_outer;
      spec.max_inner = max_inner;
      spec.m = solve_opt.m;
      spec.n = solve_opt.n;
      spec.seed = solve_opt.seed;
      spec.f_reference = f_reference;
      spec.zero_time_columns = no_timing;
      if (!solve_opt.out.empty()) {
        spec.trace_csv = solve_opt.out + ".csv";
        spec.summary_json = solve_opt.out + ".json";
      }
      const auto outcome = solve_opt.instance_path.empty()
                               ? bench::run_experiment(spec)
                               : bench::run_experiment(spec, load_instance(solve_opt.instance_path));
      if (solve_opt.format == "json") {
        std::cout << bench::summary_to_json(spec, outcome.result);
      } else {
        std::cout << "method,kernel,status,outer,inner,kkt_final,objective_final\n"
                  << method << ',' << kernel << ',' << ot::to_string(outcome.result.status) << ','
                  << outcome.result.outer_iters << ',' << outcome.result.inner_iters << ','
                  << format_full(outcome.result.kkt_final) << ','
                  << format_full(outcome.result.objective_final) << "\n";
      }
      return outcome.exit_code;
    }

    if (sweep_cmd->parsed()) {
      std::filesystem::create_directories(sweep_opt.out);
      const ot::Index size = paper_scale ? 500 : sweep_opt.m;
      auto specs = bench::table_grid(size, paper_scale ? 500 : sweep_opt.n, sweep_opt.seed,
                                     sweep_opt.out);
      std::cerr << "running " << specs.size() << " configurations on up to "
                << bench::worker_thread_cap() << " workers\n";
      const auto outcomes = bench::run_sweep(specs);
      long converged = 0;
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].exit_code == 0) ++converged;
        std::cout << specs[i].trace_csv << ": " << ot::to_string(outcomes[i].result.status)
                  << " outer=" << outcomes[i].result.outer_iters
                  << " inner=" << outcomes[i].result.inner_iters
                  << " kkt=" << format_full(outcomes[i].result.kkt_final) << "\n";
      }
      std::cerr << converged << "/" << outcomes.size() << " converged\n";
      return 0;
    }

    if (oracle_cmd->parsed()) {
      const auto inst = resolve_instance(oracle_opt);
      const auto sol = bench::lp_oracle(inst);
      const auto kkt = ot::kkt_residual(inst, sol.plan, ot::DualPair<double>{sol.f, sol.g});
      std::cout << "optimal value: " << format_full(sol.value) << " (kkt "
                << format_full(kkt.delta_kkt) << ")\n";
      if (!oracle_opt.out.empty()) {
        if (oracle_opt.format == "json") {
          nlohmann::ordered_json j;
          j["value"] = sol.value;
          j["kkt"] = kkt.delta_kkt;
          j["f"] = std::vector<double>(sol.f.data(), sol.f.data() + sol.f.size());
          j["g"] = std::vector<double>(sol.g.data(), sol.g.data() + sol.g.size());
          auto& plan = j["plan"] = nlohmann::ordered_json::array();
          for (ot::Index i = 0; i < sol.plan.rows(); ++i) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (ot::Index jj = 0; jj < sol.plan.cols(); ++jj) row.push_back(sol.plan(i, jj));
            plan.push_back(std::move(row));
          }
          write_file(oracle_opt.out, j.dump(2) + "\n");
        } else {
          std::string text = "value," + format_full(sol.value) + "\n";
          for (ot::Index i = 0; i < sol.plan.rows(); ++i) {
            for (ot::Index jj = 0; jj < sol.plan.cols(); ++jj) {
              if (jj) text += ',';
              text += format_full(sol.plan(i, jj));
            }
            text += '\n';
          }
          write_file(oracle_opt.out, text);
        }
      }
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
