#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "nmf/bench/generators.hpp"
#include "nmf/bench/io.hpp"
#include "nmf/solvers.hpp"

namespace nmf::bench {

struct ProblemSize {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t r = 0;

  bool operator==(const ProblemSize&) const = default;
};

struct Campaign {
  std::vector<ProblemSize> sizes;
  std::vector<double> epsilons;
  std::size_t n_matrices = 1;
  std::size_t n_starts = 1;
  std::vector<Algorithm> algorithms;
  double time_limit_s = 45.0;
  std::uint64_t seed = 0;
  /// Per-run sweep cap on top of the time limit; 0 means none.
  std::size_t max_sweeps = 0;
  /// Worker threads; 0 means hardware concurrency.
  std::size_t threads = 0;
  /// Solver parameters other than algorithm, rank and stopping rule.
  SolverConfig base;

  void validate() const {
    if (sizes.empty() || epsilons.empty() || algorithms.empty())
      throw InputError("campaign needs sizes, tolerances and algorithms");
    if (n_matrices == 0 || n_starts == 0) throw InputError("campaign counts must be at least 1");
    for (const auto& s : sizes)
      if (s.m == 0 || s.n == 0 || s.r == 0) throw InputError("sizes must be positive");
    for (double e : epsilons)
      if (!(e > 0.0 && e < 1.0)) throw InputError("tolerances must lie in (0, 1)");
    if (!(time_limit_s > 0.0)) throw InputError("time limit must be positive");
  }
};

struct RunRecord {
  std::size_t size_index = 0;
  ProblemSize size;
  /// Global over the campaign: size_index * n_matrices + local index.
  std::size_t matrix_id = 0;
  std::size_t start_id = 0;
  Algorithm algorithm = Algorithm::RRI;
  double epsilon = 0.0;
  bool succeeded = false;
  StopReason stop_reason = StopReason::Criterion;
  double elapsed_s = 0.0;
  std::size_t sweeps = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double final_pgrad_ratio = 0.0;
};

inline auto record_key(const RunRecord& r) {
  return std::make_tuple(r.matrix_id, r.start_id, static_cast<int>(r.algorithm), r.epsilon);
}

inline RunRecord make_record(const SolverReport& rep, double time_limit) {
  RunRecord rec;
  rec.succeeded = rep.stop_reason == StopReason::Criterion && rep.elapsed_seconds() <= time_limit;
  rec.stop_reason = rep.stop_reason;
  rec.elapsed_s = rep.elapsed_seconds();
  rec.sweeps = rep.sweeps();
  rec.initial_objective = rep.trace.front().objective;
  rec.final_objective = rep.trace.back().objective;
  rec.final_pgrad_ratio = rep.initial_gradient_norm > 0.0
                              ? rep.trace.back().pgrad_norm / rep.initial_gradient_norm
                              : 0.0;
  return rec;
}

/**
 * Runs every (matrix, start, algorithm, ε) combination. All algorithms and
 * tolerances for one (matrix, start) begin from the same scaled random point,
 * and each ε is a fresh run. Records come back sorted by
 * (matrix_id, start_id, algorithm, ε) whatever the thread count.
 */
inline std::vector<RunRecord> run_campaign(const Campaign& c) {
  c.validate();
  struct Job {
    std::size_t size_index, matrix_id, start_id;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < c.sizes.size(); ++s)
    for (std::size_t i = 0; i < c.n_matrices; ++i)
      for (std::size_t k = 0; k < c.n_starts; ++k) jobs.push_back({s, s * c.n_matrices + i, k});

  std::vector<RunRecord> records;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job job = jobs[j];
      const ProblemSize sz = c.sizes[job.size_index];
      const Matrix A = gen_random_instance(sz.m, sz.n, matrix_seed(c.seed, job.matrix_id));
      const FactorPair start = init_scaled(A, sz.r, start_seed(c.seed, job.matrix_id, job.start_id));
      std::vector<RunRecord> local;
      for (Algorithm algo : c.algorithms)
        for (double eps : c.epsilons) {
          SolverConfig cfg = c.base;
          cfg.algorithm = algo;
          cfg.rank = sz.r;
          cfg.stop.epsilon_rel = eps;
          cfg.stop.max_seconds = c.time_limit_s;
          cfg.stop.max_sweeps = c.max_sweeps ? c.max_sweeps : cfg.stop.max_sweeps;
          RunRecord rec = make_record(run(A, cfg, start), c.time_limit_s);
          rec.size_index = job.size_index;
          rec.size = sz;
          rec.matrix_id = job.matrix_id;
          rec.start_id = job.start_id;
          rec.algorithm = algo;
          rec.epsilon = eps;
          local.push_back(rec);
        }
      std::lock_guard lock(mu);
      records.insert(records.end(), local.begin(), local.end());
    }
  };
  std::size_t n_threads = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) { return record_key(a) < record_key(b); });
  return records;
}

// ---------------------------------------------------------------------------
// Summary table: one row per (size, ε), one column per algorithm.

struct CellStats {
  std::size_t runs = 0;
  std::size_t successes = 0;
  double mean_elapsed = 0.0;  // over successes
};

inline CellStats cell_stats(const std::vector<RunRecord>& records, std::size_t size_index,
                            double eps, Algorithm algo) {
  CellStats s;
  double total = 0.0;
  for (const auto& r : records) {
    if (r.size_index != size_index || r.epsilon != eps || r.algorithm != algo) continue;
    ++s.runs;
    if (r.succeeded) {
      ++s.successes;
      total += r.elapsed_s;
    }
  }
  if (s.successes) s.mean_elapsed = total / static_cast<double>(s.successes);
  return s;
}

/// "0.02" when every run succeeded, "0.02(96)" for partial success,
/// "45*(0)" (the time limit) when none did.
inline std::string format_cell(const CellStats& s, double time_limit) {
  char buf[64];
  if (s.successes == 0) {
    std::snprintf(buf, sizeof buf, "%g*(0)", time_limit);
  } else if (s.successes == s.runs) {
    std::snprintf(buf, sizeof buf, "%.2f", s.mean_elapsed);
  } else {
    std::snprintf(buf, sizeof buf, "%.2f(%zu)", s.mean_elapsed, s.successes);
  }
  return buf;
}

inline std::string format_epsilon(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

/// Plain-text table, columns separated by two spaces.
inline void write_summary(std::ostream& os, const Campaign& c, const std::vector<RunRecord>& records) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"size", "eps"};
  for (Algorithm a : c.algorithms) head.emplace_back(to_string(a));
  rows.push_back(head);
  for (std::size_t s = 0; s < c.sizes.size(); ++s)
    for (double eps : c.epsilons) {
      const auto& sz = c.sizes[s];
      std::vector<std::string> row{"(" + std::to_string(sz.m) + "," + std::to_string(sz.n) + "," +
                                       std::to_string(sz.r) + ")",
                                   format_epsilon(eps)};
      for (Algorithm a : c.algorithms)
        row.push_back(format_cell(cell_stats(records, s, eps, a), c.time_limit_s));
      rows.push_back(row);
    }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) os << "  ";
      os << row[k] << std::string(width[k] - row[k].size(), ' ');
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Emission.

enum class RecordFormat { Csv, Json };

inline constexpr const char* kRecordHeader =
    "matrix_id,start_id,m,n,r,algorithm,epsilon,succeeded,stop_reason,elapsed_s,sweeps,"
    "initial_objective,final_objective,final_pgrad_ratio";

inline void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << kRecordHeader << '\n';
  for (const auto& r : records)
    os << r.matrix_id << ',' << r.start_id << ',' << r.size.m << ',' << r.size.n << ',' << r.size.r
       << ',' << to_string(r.algorithm) << ',' << format_double(r.epsilon) << ','
       << (r.succeeded ? 1 : 0) << ',' << to_string(r.stop_reason) << ','
       << format_double(r.elapsed_s) << ',' << r.sweeps << ',' << format_double(r.initial_objective)
       << ',' << format_double(r.final_objective) << ',' << format_double(r.final_pgrad_ratio)
       << '\n';
}

inline nlohmann::json records_to_json(const std::vector<RunRecord>& records) {
  auto out = nlohmann::json::array();
  for (const auto& r : records)
    out.push_back({{"matrix_id", r.matrix_id},
                   {"start_id", r.start_id},
                   {"m", r.size.m},
                   {"n", r.size.n},
                   {"r", r.size.r},
                   {"algorithm", std::string(to_string(r.algorithm))},
                   {"epsilon", r.epsilon},
                   {"succeeded", r.succeeded},
                   {"stop_reason", std::string(to_string(r.stop_reason))},
                   {"elapsed_s", r.elapsed_s},
                   {"sweeps", r.sweeps},
                   {"initial_objective", r.initial_objective},
                   {"final_objective", r.final_objective},
                   {"final_pgrad_ratio", r.final_pgrad_ratio}});
  return out;
}

inline void emit(std::ostream& os, const std::vector<RunRecord>& records, RecordFormat format) {
  if (format == RecordFormat::Csv)
    write_records_csv(os, records);
  else
    os << records_to_json(records).dump(2) << '\n';
}

inline void write_trace_csv(std::ostream& os, const std::vector<TracePoint>& trace) {
  os << "sweep,elapsed_s,objective,pgrad_norm\n";
  for (const auto& t : trace)
    os << t.sweep << ',' << format_double(t.elapsed_seconds) << ',' << format_double(t.objective)
       << ',' << format_double(t.pgrad_norm) << '\n';
}

inline nlohmann::json trace_to_json(const std::vector<TracePoint>& trace) {
  auto out = nlohmann::json::array();
  for (const auto& t : trace)
    out.push_back({{"sweep", t.sweep},
                   {"elapsed_s", t.elapsed_seconds},
                   {"objective", t.objective},
                   {"pgrad_norm", t.pgrad_norm}});
  return out;
}

}  // namespace nmf::bench
