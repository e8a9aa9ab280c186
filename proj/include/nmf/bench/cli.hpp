#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmf/bench/campaign.hpp"
#include "nmf/bench/smooth.hpp"
#include "nmf/constraint_sets.hpp"
#include "nmf/svd.hpp"
#include "nmf/tensor.hpp"

namespace nmf::bench {

/// Flags that parse individually but do not fit together.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::vector<std::size_t> parse_counts(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  for (auto part : split(text, ',')) {
    std::size_t v = 0;
    if (!parse_number(part, v) || v == 0) throw UsageError(std::string("bad ") + what + ": " + text);
    out.push_back(v);
  }
  return out;
}

inline ProblemSize parse_size(const std::string& text) {
  const auto v = parse_counts(text, "size (want m,n,r)");
  if (v.size() != 3) throw UsageError("size must be m,n,r: " + text);
  return {v[0], v[1], v[2]};
}

/// binary | normed | nonneg | sparsek:K | hoyer:T
inline ConstraintSet parse_constraint(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "binary" && arg.empty()) return ConstraintSet::binary();
  if (name == "normed" && arg.empty()) return ConstraintSet::normed();
  if (name == "nonneg" && arg.empty()) return ConstraintSet::normed_nonneg();
  if (name == "sparsek") {
    std::size_t k = 0;
    if (parse_number(std::string_view(arg), k) && k > 0) return ConstraintSet::sparse_k(k);
  }
  if (name == "hoyer") {
    double t = 0.0;
    if (parse_number(std::string_view(arg), t) && t >= 0.0 && t <= 1.0)
      return ConstraintSet::hoyer_sparse(t);
  }
  throw UsageError("bad constraint: " + text);
}

inline std::vector<Algorithm> parse_algorithms(const std::vector<std::string>& names) {
  std::vector<Algorithm> out;
  for (const auto& n : names) {
    if (n == "all") {
      out.insert(out.end(), std::begin(kAllAlgorithms), std::end(kAllAlgorithms));
      continue;
    }
    const auto a = parse_algorithm(n);
    if (!a) throw UsageError("unknown algorithm: " + n);
    out.push_back(*a);
  }
  return out;
}

inline RecordFormat parse_format(const std::string& f) {
  if (f == "csv") return RecordFormat::Csv;
  if (f == "json") return RecordFormat::Json;
  throw UsageError("format must be csv or json");
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  return os;
}

/**
 * Adds the entries of a flat key=value file as flags of `sub`, skipping keys
 * already given on the command line. Returns the argument list to reparse.
 */
inline std::vector<std::string> merge_config(const CLI::App& sub, const std::string& path,
                                             std::vector<std::string> args) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config " + path);
  const auto items = CLI::ConfigINI().from_config(is);
  std::vector<std::string> extra;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty()) throw UsageError("config keys must be flat: " + item.fullname());
    const CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (!opt || item.name == "config") throw UsageError("unknown config key: " + item.name);
    if (opt->count() > 0) continue;
    // The INI reader splits "30,20,2" into three inputs; flags take it whole.
    std::string value;
    for (const auto& in : item.inputs) value += (value.empty() ? "" : ",") + in;
    extra.push_back("--" + item.name);
    extra.push_back(value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

struct Source {
  Matrix A;
  std::size_t rank = 0;
};

/// --input files (CSV, or PGM images as columns) or a generated --size instance.
inline Source load_source(const std::vector<std::string>& inputs, const std::string& size,
                          std::size_t rank, std::uint64_t seed) {
  Source s;
  if (!inputs.empty()) {
    if (!size.empty()) throw UsageError("give either --input or --size");
    if (rank == 0) throw UsageError("--rank is required with --input");
    const bool pgm = format_from_path(inputs.front()) == MatrixFormat::Pgm;
    if (!pgm && inputs.size() > 1) throw UsageError("only PGM inputs can be combined");
    s.A = pgm ? load_pgm_columns(inputs) : load_matrix(inputs.front(), MatrixFormat::Csv);
    s.rank = rank;
    return s;
  }
  const ProblemSize sz = parse_size(size.empty() ? "30,20,2" : size);
  if (rank != 0 && rank != sz.r) throw UsageError("--rank disagrees with --size");
  s.A = gen_random_instance(sz.m, sz.n, matrix_seed(seed, 0));
  s.rank = sz.r;
  return s;
}

}  // namespace detail

struct CliOptions {
  std::vector<std::string> sizes;
  std::string size;
  std::vector<double> eps;
  std::vector<std::string> algos;
  std::uint64_t seed = 1;
  double time_limit = 45.0;
  std::size_t max_sweeps = 0;
  std::string out_path;
  std::string format = "csv";
  std::string config;

  std::size_t matrices = 20;
  std::size_t starts = 1;
  std::size_t threads = 0;

  std::vector<std::string> inputs;
  std::size_t rank = 0;
  double psi = 1.0;
  std::string constraint;
  std::string constraint_v;
  std::size_t grri_sweeps = 200;
  std::string factors_prefix;

  std::string dims;
  std::size_t tensor_sweeps = 100;
  double tensor_tol = 1e-12;

  std::vector<double> deltas{0.0, 10.0, 100.0};
  std::size_t n_seeds = 5;
  double noise = 0.2;
};

namespace detail {

inline StopRule stop_rule(const CliOptions& o, double eps) {
  StopRule s;
  s.epsilon_rel = eps;
  s.max_seconds = o.time_limit;
  if (o.max_sweeps) s.max_sweeps = o.max_sweeps;
  return s;
}

inline double single_eps(const CliOptions& o, double fallback) {
  if (o.eps.size() > 1) throw UsageError("this command takes one --eps");
  return o.eps.empty() ? fallback : o.eps.front();
}

inline int cmd_bench(const CliOptions& o, std::ostream& out) {
  Campaign c;
  for (const auto& s : o.sizes.empty() ? std::vector<std::string>{"30,20,2", "50,40,5"} : o.sizes)
    c.sizes.push_back(parse_size(s));
  c.epsilons = o.eps.empty() ? std::vector<double>{1e-2, 1e-4} : o.eps;
  c.algorithms = parse_algorithms(o.algos.empty() ? std::vector<std::string>{"all"} : o.algos);
  c.n_matrices = o.matrices;
  c.n_starts = o.starts;
  c.time_limit_s = o.time_limit;
  c.seed = o.seed;
  c.max_sweeps = o.max_sweeps;
  c.threads = o.threads;
  const RecordFormat fmt = parse_format(o.format);
  c.validate();
  const auto records = run_campaign(c);
  write_summary(out, c, records);
  if (!o.out_path.empty()) {
    auto os = open_output(o.out_path);
    emit(os, records, fmt);
  }
  return 0;
}

inline void write_factors(const std::string& prefix, const FactorPair& fp) {
  auto u = open_output(prefix + "_U.csv");
  write_matrix_csv(u, fp.U);
  auto v = open_output(prefix + "_V.csv");
  write_matrix_csv(v, fp.V);
}

inline int cmd_factor(const CliOptions& o, std::ostream& out) {
  const RecordFormat fmt = parse_format(o.format);
  const Source src = load_source(o.inputs, o.size, o.rank, o.seed);
  const bool grri = !o.constraint.empty() || !o.constraint_v.empty();
  if (grri) {
    if (!o.algos.empty()) throw UsageError("--algo does not apply with --constraint");
    const ConstraintSet sx = parse_constraint(o.constraint.empty() ? "nonneg" : o.constraint);
    const ConstraintSet sy = parse_constraint(o.constraint_v.empty() ? "nonneg" : o.constraint_v);
    const auto init = grri_init(src.A, src.rank, sx, sy, start_seed(o.seed, 0, 0));
    const GrriReport rep = grri_run(src.A, init, sx, sy, o.grri_sweeps);
    out << "GRRI sweeps " << o.grri_sweeps << " objective " << format_double(rep.objective_trace.back())
        << '\n';
    auto write = [&](std::ostream& os) {
      if (fmt == RecordFormat::Csv) {
        os << "sweep,objective\n";
        for (std::size_t k = 0; k < rep.objective_trace.size(); ++k)
          os << k << ',' << format_double(rep.objective_trace[k]) << '\n';
      } else {
        auto j = nlohmann::json::array();
        for (std::size_t k = 0; k < rep.objective_trace.size(); ++k)
          j.push_back({{"sweep", k}, {"objective", rep.objective_trace[k]}});
        os << j.dump(2) << '\n';
      }
    };
    if (o.out_path.empty()) {
      write(out);
    } else {
      auto os = open_output(o.out_path);
      write(os);
    }
    if (!o.factors_prefix.empty()) write_factors(o.factors_prefix, rep.final.to_factor_pair());
    return 0;
  }

  if (o.algos.size() > 1) throw UsageError("factor takes one --algo");
  SolverConfig cfg;
  if (!o.algos.empty()) cfg.algorithm = parse_algorithms(o.algos).front();
  cfg.rank = src.rank;
  cfg.damping_psi = o.psi;
  cfg.seed = o.seed;
  cfg.stop = stop_rule(o, single_eps(o, 1e-4));
  cfg.validate();
  const SolverReport rep = run(src.A, cfg, init_scaled(src.A, src.rank, start_seed(o.seed, 0, 0)));
  const double ratio =
      rep.initial_gradient_norm > 0.0 ? rep.trace.back().pgrad_norm / rep.initial_gradient_norm : 0.0;
  out << to_string(cfg.algorithm) << " stop " << to_string(rep.stop_reason) << " sweeps "
      << rep.sweeps() << " objective " << format_double(rep.trace.back().objective)
      << " pgrad_ratio " << format_double(ratio) << '\n';
  auto write = [&](std::ostream& os) {
    if (fmt == RecordFormat::Csv)
      write_trace_csv(os, rep.trace);
    else
      os << trace_to_json(rep.trace).dump(2) << '\n';
  };
  if (o.out_path.empty()) {
    write(out);
  } else {
    auto os = open_output(o.out_path);
    write(os);
  }
  if (!o.factors_prefix.empty()) write_factors(o.factors_prefix, rep.final);
  return 0;
}

/// Images stacked as height x width x count, or an exact random Kruskal tensor.
inline DenseTensor tensor_source(const CliOptions& o, std::size_t rank) {
  if (!o.inputs.empty()) {
    if (!o.dims.empty()) throw UsageError("give either --input or --dims");
    std::vector<GrayImage> imgs;
    for (const auto& p : o.inputs) {
      auto is = open_input(p, true);
      imgs.push_back(read_pgm(is));
      if (imgs.back().width != imgs.front().width || imgs.back().height != imgs.front().height)
        throw InputError("image " + p + " differs in size");
    }
    const std::size_t h = imgs.front().height, w = imgs.front().width;
    DenseTensor T({h, w, imgs.size()});
    for (std::size_t l = 0; l < imgs.size(); ++l)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) T({i, j, l}) = imgs[l].pixels[i * w + j];
    return T;
  }
  const auto dims = parse_counts(o.dims.empty() ? "5,4,3" : o.dims, "dims");
  KruskalTensor S = kruskal_init(dims, rank, matrix_seed(o.seed, 0));
  Lcg64 rng(matrix_seed(o.seed, 1));
  for (double& s : S.sigma) s = 0.5 + rng.uniform();
  return kruskal_to_dense(S);
}

inline int cmd_tensor(const CliOptions& o, std::ostream& out) {
  const RecordFormat fmt = parse_format(o.format);
  const std::size_t rank = o.rank ? o.rank : 1;
  const DenseTensor T = tensor_source(o, rank);
  const TensorReport rep =
      tensor_rri(T, kruskal_init(T.dims(), rank, start_seed(o.seed, 0, 0)), o.tensor_sweeps, o.tensor_tol);
  out << "tensor";
  for (std::size_t n : T.dims()) out << ' ' << n;
  out << " rank " << rank << " error " << format_double(rep.error_trace.back()) << " sigma";
  for (double s : rep.final.sigma) out << ' ' << format_double(s);
  out << '\n';
  auto write = [&](std::ostream& os) {
    if (fmt == RecordFormat::Csv) {
      os << "sweep,error\n";
      for (std::size_t k = 0; k < rep.error_trace.size(); ++k)
        os << k << ',' << format_double(rep.error_trace[k]) << '\n';
    } else {
      nlohmann::json j = {{"sigma", rep.final.sigma}, {"error", rep.error_trace}};
      os << j.dump(2) << '\n';
    }
  };
  if (o.out_path.empty()) {
    write(out);
  } else {
    auto os = open_output(o.out_path);
    write(os);
  }
  return 0;
}

inline int cmd_smooth(const CliOptions& o, std::ostream& out) {
  const RecordFormat fmt = parse_format(o.format);
  SmoothSettings s;
  s.deltas = o.deltas;
  s.n_seeds = o.n_seeds;
  s.seed = o.seed;
  s.rank = o.rank ? o.rank : kSmoothSources;
  s.noise_rel = o.noise;
  s.stop = stop_rule(o, single_eps(o, 1e-4));
  if (!o.max_sweeps) s.stop.max_sweeps = 3000;
  for (double d : s.deltas)
    if (!(d >= 0.0)) throw UsageError("--delta values must be nonnegative");
  const auto runs = run_smooth_experiment(s);
  out << "delta  energy  rel_error\n";
  for (const auto& m : summarize(runs, s.deltas))
    out << format_epsilon(m.delta) << "  " << format_double(m.mean_energy) << "  "
        << format_double(m.mean_relative_error) << '\n';
  if (!o.out_path.empty()) {
    auto os = open_output(o.out_path);
    if (fmt == RecordFormat::Csv) {
      os << "delta,seed,energy,relative_error,stop_reason,sweeps,elapsed_s\n";
      for (const auto& r : runs)
        os << format_double(r.delta) << ',' << r.seed << ',' << format_double(r.energy) << ','
           << format_double(r.relative_error) << ',' << to_string(r.stop_reason) << ',' << r.sweeps
           << ',' << format_double(r.elapsed_s) << '\n';
    } else {
      auto j = nlohmann::json::array();
      for (const auto& r : runs)
        j.push_back({{"delta", r.delta},
                     {"seed", r.seed},
                     {"energy", r.energy},
                     {"relative_error", r.relative_error},
                     {"stop_reason", std::string(to_string(r.stop_reason))},
                     {"sweeps", r.sweeps},
                     {"elapsed_s", r.elapsed_s}});
      os << j.dump(2) << '\n';
    }
  }
  return 0;
}

inline int cmd_baseline(const CliOptions& o, std::ostream& out) {
  const Source src = load_source(o.inputs, o.size, o.rank, o.seed);
  const std::size_t k = std::min(src.A.rows(), src.A.cols());
  if (src.rank > k) throw UsageError("rank exceeds min(m, n)");
  const NonnegBaseline b = nonneg_part_baseline(src.A, src.rank);
  out << "rank " << src.rank << " truncated_error " << format_double(b.truncated_error)
      << " nonneg_error " << format_double(b.nonneg_error) << '\n';
  if (!o.out_path.empty()) {
    auto os = open_output(o.out_path);
    write_matrix_csv(os, b.nonneg_part);
  }
  return 0;
}

}  // namespace detail

/// Exit codes: 0 success, 1 numeric or file failure, 2 usage error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliOptions o;
  CLI::App app{"Nonnegative matrix factorization benchmarks"};
  app.name("nmfbench");
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Base seed");
    sub->add_option("--out", o.out_path, "Output file");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--config", o.config, "Flat key=value file mirroring the flags");
  };
  auto solver_flags = [&](CLI::App* sub) {
    sub->add_option("--eps", o.eps, "Relative projected-gradient tolerance")->delimiter(',');
    sub->add_option("--algo", o.algos, "Mult FLine CLine FFO CFO ALS RRI DampedRRI or all")
        ->delimiter(',');
    sub->add_option("--time-limit", o.time_limit, "Seconds per run")->check(CLI::PositiveNumber);
    sub->add_option("--max-sweeps", o.max_sweeps, "Sweep cap per run, 0 for none");
  };

  auto* bench = app.add_subcommand("bench", "Multi-start campaign with a summary table");
  common(bench);
  solver_flags(bench);
  bench->add_option("--size", o.sizes, "m,n,r (repeatable)");
  bench->add_option("--matrices", o.matrices, "Random matrices per size")->check(CLI::PositiveNumber);
  bench->add_option("--starts", o.starts, "Starting points per matrix")->check(CLI::PositiveNumber);
  bench->add_option("--threads", o.threads, "Worker threads, 0 for all cores");

  auto* factor = app.add_subcommand("factor", "Factor one matrix and write the trace");
  common(factor);
  solver_flags(factor);
  factor->add_option("--size", o.size, "m,n,r of a generated instance");
  factor->add_option("--input", o.inputs, "CSV matrix or PGM images (one column each)");
  factor->add_option("--rank", o.rank, "Rank for --input");
  factor->add_option("--psi", o.psi, "Damping for DampedRRI");
  factor->add_option("--constraint", o.constraint, "Set for U: binary|normed|nonneg|sparsek:K|hoyer:T");
  factor->add_option("--constraint-v", o.constraint_v, "Set for V, same choices");
  factor->add_option("--sweeps", o.grri_sweeps, "Sweeps for constrained runs");
  factor->add_option("--factors", o.factors_prefix, "Write PREFIX_U.csv and PREFIX_V.csv");

  auto* tensor = app.add_subcommand("tensor", "Kruskal fit by rank-one residue iteration");
  common(tensor);
  tensor->add_option("--input", o.inputs, "PGM images stacked along the third mode");
  tensor->add_option("--dims", o.dims, "Dimensions of a generated exact tensor");
  tensor->add_option("--rank", o.rank, "Kruskal rank");
  tensor->add_option("--sweeps", o.tensor_sweeps, "Sweep cap");
  tensor->add_option("--tol", o.tensor_tol, "Stop when the error drops by less than tol*|T|");

  auto* smooth = app.add_subcommand("smooth", "Smoothness-regularized source recovery");
  common(smooth);
  smooth->add_option("--delta", o.deltas, "Smoothing weights")->delimiter(',');
  smooth->add_option("--seeds", o.n_seeds, "Mixtures per weight")->check(CLI::PositiveNumber);
  smooth->add_option("--rank", o.rank, "Rank, default 4");
  smooth->add_option("--noise", o.noise, "Noise norm relative to the clean mixture");
  smooth->add_option("--eps", o.eps, "Relative projected-gradient tolerance")->delimiter(',');
  smooth->add_option("--time-limit", o.time_limit, "Seconds per run")->check(CLI::PositiveNumber);
  smooth->add_option("--max-sweeps", o.max_sweeps, "Sweep cap per run, default 3000");

  auto* baseline = app.add_subcommand("baseline", "SVD truncation and its nonnegative part");
  common(baseline);
  baseline->add_option("--size", o.size, "m,n,r of a generated instance");
  baseline->add_option("--input", o.inputs, "CSV matrix or PGM images");
  baseline->add_option("--rank", o.rank, "Rank for --input");

  if (argc <= 1) {
    err << app.help();
    return 2;
  }
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    auto parse = [&](std::vector<std::string> a) {
      std::reverse(a.begin(), a.end());
      app.parse(a);
    };
    parse(args);
    CLI::App* sub = app.get_subcommands().front();
    if (!o.config.empty()) parse(detail::merge_config(*sub, o.config, args));

    if (sub == bench) return detail::cmd_bench(o, out);
    if (sub == factor) return detail::cmd_factor(o, out);
    if (sub == tensor) return detail::cmd_tensor(o, out);
    if (sub == smooth) return detail::cmd_smooth(o, out);
    return detail::cmd_baseline(o, out);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace nmf::bench
