#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "knnlab/knnlab.hpp"

using namespace knnlab;
using namespace knnlab::lab;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* app, CommonOptions& opts, bool seed_required) {
  app->add_option("--config", opts.config_path, "key = value config file");
  app->add_option("--out", opts.out, "output prefix; writes <out>_reps.csv and <out>_summary.csv");
  for (const auto& key : config_keys()) {
    auto* o = app->add_option("--" + key, opts.overrides[key], "override config key " + key);
    if (key == "seed" && seed_required) o->required();
  }
}

ConfigMap merged(const CommonOptions& opts) {
  ConfigMap c = opts.config_path.empty() ? ConfigMap{} : load_config(opts.config_path);
  for (const auto& [k, v] : opts.overrides) {
    if (!v.empty()) c[k] = v;
  }
  return c;
}

void emit(const CommonOptions& opts, const std::vector<SummaryRow>& rows, const ExperimentResult* reps) {
  if (opts.out.empty()) {
    write_summary_csv(std::cout, rows);
    return;
  }
  save_summary_csv(opts.out + "_summary.csv", rows);
  if (reps) save_rep_csv(opts.out + "_reps.csv", *reps);
  std::cerr << "wrote " << opts.out << "_summary.csv\n";
}

int run_theory(const ConfigMap& c, std::size_t resolution) {
  const auto model = model_from_config(c);
  const auto ns = parse_size_list(get(c, "n_grid", "2^10"));
  const auto omegas = parse_real_list(get(c, "omega_grid", "0"));
  const KRule rule = KRule::parse(get(c, "k_rule", "optimal_formula"));
  CorruptionSpec spec;
  spec.mode = parse_mode(get(c, "corruption_mode", "random"));
  spec.norm_p = parse_real(get(c, "norm_p", "2"), "norm_p");
  spec.geometry = parse_geometry(get(c, "geometry", "sphere"));
  const auto mesh = boundary_mesh(*model, resolution);
  std::cout << "model,d,n,k,omega,corruption_mode,bias,corruption,variance,total,t_max,eps_knw\n";
  for (std::size_t n : ns) {
    const std::size_t k = rule.kind == KRuleKind::fixed ? rule.k : optimal_k(n, model->dimension(), 0.0);
    for (double w : omegas) {
      spec.omega = w;
      const auto r = theoretical_regret(*model, k, n, spec, mesh);
      std::cout << model->name() << ',' << model->dimension() << ',' << n << ',' << k << ',' << format_real(w) << ','
                << to_string(spec.mode) << ',' << format_real(r.bias) << ',' << format_real(r.corruption) << ','
                << format_real(r.variance) << ',' << format_real(r.total) << ',' << format_real(r.t_max) << ','
                << format_real(r.eps_knw) << '\n';
      for (const auto& warn : r.warnings) std::cerr << "warning: " << warn << '\n';
    }
  }
  return 0;
}

int run_cv(const ExperimentSpec& spec) {
  const std::size_t n = spec.n_grid.front();
  // Same streams as rep 0 of `simulate`.
  const RngHandle base(spec.master_seed, mix_stream({n, 0}));
  Dataset data = [&] {
    if (spec.synthetic()) {
      RngHandle rng = base.substream(1);
      return sample_dataset(*spec.model, n, rng);
    }
    RngHandle rng(spec.master_seed, mix_stream({8}));
    return split_normalized(*spec.dataset, spec.test_fraction, rng).train;
  }();
  RngHandle cv_rng = base.substream(4);
  const auto r = cross_validate_k(data, spec.k_rule.folds, cv_rng);
  std::cout << "k,cv_errors\n";
  for (std::size_t i = 0; i < r.k_grid.size(); ++i) std::cout << r.k_grid[i] << ',' << r.errors[i] << '\n';
  std::cout << "# n=" << data.size() << " k_tilde=" << r.k_tilde << " k_hat=" << r.k_hat << '\n';
  return 0;
}

int run_data(const ExperimentSpec& spec) {
  if (spec.synthetic()) throw ConfigError("data: no data path configured");
  const Dataset& all = *spec.dataset;
  std::size_t positives = 0;
  for (auto l : all.labels()) positives += l;
  RngHandle rng(spec.master_seed, mix_stream({8}));
  const auto s = split_normalized(all, spec.test_fraction, rng);
  const auto train_scale = MinMaxScaler::fit(s.train);
  std::cout << "rows," << all.size() << "\nfeatures," << all.dimension() << "\npositives," << positives
            << "\ntrain," << s.train.size() << "\ntest," << s.test.size() << '\n';
  for (std::size_t j = 0; j < all.dimension(); ++j) {
    std::cout << "train_range_" << j << ',' << format_real(train_scale.lower[j]) << ','
              << format_real(train_scale.upper[j]) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-NN robustness lab"};
  app.require_subcommand(1);

  CommonOptions sim_opts, theory_opts, cv_opts, scan_opts, cmp_opts, data_opts;
  std::size_t resolution = 32;
  auto* sim = app.add_subcommand("simulate", "run an experiment spec");
  add_common(sim, sim_opts, true);
  auto* theory = app.add_subcommand("theory", "leading-term regret tables");
  add_common(theory, theory_opts, false);
  theory->add_option("--resolution", resolution, "boundary mesh panels per axis");
  auto* cv = app.add_subcommand("cv", "cross-validated k selection on one sample");
  add_common(cv, cv_opts, false);
  auto* scan = app.add_subcommand("scan", "regret across the omega grid at the first n");
  add_common(scan, scan_opts, false);
  auto* cmp = app.add_subcommand("compare", "variant table with ratios to the first variant");
  add_common(cmp, cmp_opts, false);
  auto* data = app.add_subcommand("data", "load, split and normalize a CSV");
  add_common(data, data_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto res = run_experiment(spec_from_config(merged(sim_opts)));
      emit(sim_opts, summary_rows(res), &res);
    } else if (theory->parsed()) {
      return run_theory(merged(theory_opts), resolution);
    } else if (cv->parsed()) {
      return run_cv(spec_from_config(merged(cv_opts)));
    } else if (scan->parsed()) {
      const auto spec = spec_from_config(merged(scan_opts));
      const auto res = phase_transition_scan(spec, spec.n_grid.front(), spec.omega_grid);
      emit(scan_opts, summary_rows(res), &res.result);
    } else if (cmp->parsed()) {
      const auto res = compare_variants(spec_from_config(merged(cmp_opts)));
      emit(cmp_opts, summary_rows(res), &res.result);
    } else if (data->parsed()) {
      return run_data(spec_from_config(merged(data_opts)));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
