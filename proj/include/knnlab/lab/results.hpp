#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "knnlab/errors.hpp"
#include "knnlab/lab/experiment.hpp"

namespace knnlab::lab {

inline constexpr const char* kRepHeader = "experiment_id,variant,metric,d,n,k,omega,corruption_mode,rep,value,seed";
inline constexpr const char* kSummaryHeader =
    "experiment_id,variant,metric,d,n,k,omega,corruption_mode,reps,mean,std_error,seed";

// Round-trip-safe decimal form.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct SummaryRow {
  std::string experiment_id;
  std::string variant;
  std::string metric;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double omega = 0.0;
  std::string corruption_mode;
  std::size_t reps = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
};

inline void write_summary_row(std::ostream& out, const SummaryRow& r) {
  out << r.experiment_id << ',' << r.variant << ',' << r.metric << ',' << r.d << ',' << r.n << ',' << r.k << ','
      << format_real(r.omega) << ',' << r.corruption_mode << ',' << r.reps << ',' << format_real(r.mean) << ','
      << format_real(r.std_error) << ',' << r.seed << '\n';
}

/// One row per rep per (variant, n, omega) cell.
inline void write_rep_csv(std::ostream& out, const ExperimentResult& res) {
  const auto& s = res.spec;
  const std::string metric = s.metric();
  const std::string mode = to_string(s.corruption.mode);
  out << kRepHeader << '\n';
  for (std::size_t v = 0; v < s.variants.size(); ++v) {
    const std::string name = s.variants[v].name();
    for (std::size_t a = 0; a < s.n_grid.size(); ++a) {
      for (std::size_t b = 0; b < s.omega_grid.size(); ++b) {
        for (std::size_t r = 0; r < s.reps; ++r) {
          const auto& rec = res.record(v, a, b, r);
          out << s.experiment_id << ',' << name << ',' << metric << ',' << s.dimension() << ',' << s.n_grid[a]
              << ',' << rec.k << ',' << format_real(s.omega_grid[b]) << ',' << mode << ',' << r << ','
              << format_real(rec.value) << ',' << s.master_seed << '\n';
        }
      }
    }
  }
}

inline std::vector<SummaryRow> summary_rows(const ExperimentResult& res) {
  const auto& s = res.spec;
  std::vector<SummaryRow> rows;
  for (std::size_t v = 0; v < s.variants.size(); ++v) {
    for (std::size_t a = 0; a < s.n_grid.size(); ++a) {
      for (std::size_t b = 0; b < s.omega_grid.size(); ++b) {
        const auto e = res.estimate(v, a, b);
        rows.push_back({s.experiment_id, s.variants[v].name(), e.metric, s.dimension(), s.n_grid[a], e.k_used,
                        s.omega_grid[b], to_string(s.corruption.mode), e.reps, e.mean_regret, e.std_error,
                        s.master_seed});
      }
    }
  }
  return rows;
}

/// Mean and standard error per cell; ratio rows carry metric "<metric>_ratio"
/// and a variant label "num/den".
inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) write_summary_row(out, r);
}

inline void write_summary_csv(std::ostream& out, const ExperimentResult& res) {
  write_summary_csv(out, summary_rows(res));
}

inline std::vector<SummaryRow> summary_rows(const ScanResult& scan) {
  auto rows = summary_rows(scan.result);
  const auto& s = scan.result.spec;
  for (const auto& row : scan.rows) {
    rows.push_back({s.experiment_id, s.variants[0].name() + "/omega0", s.metric() + "_ratio", s.dimension(),
                    s.n_grid[0], row.estimate.k_used, row.omega, to_string(s.corruption.mode), s.reps, row.ratio,
                    row.ratio_se, s.master_seed});
  }
  return rows;
}

inline std::vector<SummaryRow> summary_rows(const ComparisonResult& cmp) {
  auto rows = summary_rows(cmp.result);
  const auto& s = cmp.result.spec;
  for (const auto& row : cmp.rows) {
    if (row.variant == 0) continue;
    rows.push_back({s.experiment_id, s.variants[row.variant].name() + "/" + s.variants[0].name(),
                    s.metric() + "_ratio", s.dimension(), row.n, row.estimate.k_used, row.omega,
                    to_string(s.corruption.mode), s.reps, row.ratio, row.ratio_se, s.master_seed});
  }
  return rows;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

inline void save_rep_csv(const std::string& path, const ExperimentResult& res) {
  auto out = open_output(path);
  write_rep_csv(out, res);
}

inline void save_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  auto out = open_output(path);
  write_summary_csv(out, rows);
}

}  // namespace knnlab::lab
