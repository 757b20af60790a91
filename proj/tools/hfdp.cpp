// Command-line driver: fit chains, score external assignments, run prior
// calibration grids, generate simulation designs, and re-summarize traces.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hfdp/calibrate.hpp"
#include "hfdp/io.hpp"
#include "hfdp/metrics.hpp"
#include "hfdp/sampler.hpp"
#include "hfdp/simulate.hpp"
#include "hfdp/summarize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hfdp;

namespace {

std::vector<double> parse_doubles(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) out.push_back(std::stod(s));
  return out;
}

std::vector<int> parse_ints(const std::vector<std::string>& items) {
  std::vector<int> out;
  for (const auto& s : items) out.push_back(std::stoi(s));
  return out;
}

GeneratorSpec spec_for(const std::string& design, int n_per, double pacc) {
  GeneratorSpec spec;
  spec.n_per_attribute = n_per;
  if (design == "A1") {
    spec.noise = NoiseFamily::gaussian;
  } else if (design == "A2") {
    spec.noise = NoiseFamily::student_t;
  } else if (design == "A3") {
    spec.noise = NoiseFamily::skew_normal;
  } else if (design == "B") {
    spec.noise = NoiseFamily::gaussian;
    spec.r = 4;
  } else if (design == "imperfect") {
    spec.noise = NoiseFamily::gaussian;
    spec.p_acc = pacc;
  } else {
    throw invalid_input("unknown design '" + design + "'");
  }
  return spec;
}

std::vector<std::string> default_level_names(int r) {
  std::vector<std::string> names;
  for (int a = 1; a <= r; ++a) names.push_back(std::to_string(a));
  return names;
}

struct LoadedInput {
  LabeledDataset data;
  std::vector<std::string> level_names;
  std::vector<std::string> feature_names;
  std::optional<AttributeBeliefs> beliefs;
  std::vector<int> truth;  // empty unless simulated
};

struct InputArgs {
  std::string input_path;
  std::string design;
  std::string attribute = "attribute";
  std::vector<std::string> features;
  int n_per = 200;
  double pacc = 0.9;
  long seed = 0;

  void attach(CLI::App* cmd, bool with_design = true) {
    cmd->add_option("--input", input_path, "dataset csv path");
    if (with_design)
      cmd->add_option("--design", design, "simulation design: A1 A2 A3 B imperfect");
    cmd->add_option("--attribute", attribute, "attribute column name");
    cmd->add_option("--features", features, "feature column names")->delimiter(',');
    cmd->add_option("--n-per", n_per, "observations per attribute level (designs)");
    cmd->add_option("--pacc", pacc, "label retention probability (imperfect design)");
  }

  LoadedInput load() const {
    if (input_path.empty() == design.empty())
      throw invalid_input("provide exactly one of --input and --design");
    LoadedInput out;
    if (!input_path.empty()) {
      auto csv = load_csv(input_path, features, attribute);
      out.data = std::move(csv.data);
      out.level_names = std::move(csv.level_names);
      out.feature_names = std::move(csv.feature_names);
      return out;
    }
    Rng rng(static_cast<Rng::result_type>(seed));
    auto sim = generate(spec_for(design, n_per, pacc), rng);
    out.data = std::move(sim.data);
    out.level_names = default_level_names(out.data.r);
    for (int j = 1; j <= out.data.dim(); ++j)
      out.feature_names.push_back("x" + std::to_string(j));
    out.truth = std::move(sim.true_z);
    if (design == "imperfect") out.beliefs = std::move(sim.beliefs);
    return out;
  }
};

json fairness_json(const FairnessReport& rep) {
  json j;
  j["balance"] = rep.balance.overall;
  j["per_cluster_balance"] =
      std::vector<double>(rep.balance.per_cluster.data(),
                          rep.balance.per_cluster.data() + rep.balance.per_cluster.size());
  j["occupied"] = rep.balance.occupied;
  if (std::isfinite(rep.mi))
    j["mi_pivot"] = rep.mi;
  else
    j["mi_pivot"] = "inf";
  j["epsilon_ok"] = rep.epsilon_ok;
  if (rep.fair_score == -kInf)
    j["fair_score"] = "-inf";
  else
    j["fair_score"] = rep.fair_score;
  return j;
}

json config_json(const HfdpConfig& cfg) {
  json j;
  j["K"] = cfg.K;
  j["g"] = cfg.g;
  j["b"] = cfg.b;
  j["epsilon"] = cfg.epsilon;
  j["iterations"] = cfg.iterations;
  j["burnin"] = cfg.burnin;
  j["thin"] = cfg.thin;
  j["seed"] = cfg.seed;
  j["wrla_steps"] = cfg.wrla_steps;
  j["alpha0_step"] = cfg.alpha0_step;
  j["strict_z"] = cfg.strict_z;
  return j;
}

FairnessReport report_for_sample(const TraceSample& s, const LabeledDataset& ds,
                                 double epsilon) {
  if (s.labels == ds.labels) return build_fairness_report(s.z_flat, ds, epsilon);
  auto relabeled = LabeledDataset::create(ds.points, s.labels, ds.r);
  return build_fairness_report(s.z_flat, relabeled, epsilon);
}

json summarize_trace_to(const ChainTrace& trace, const LabeledDataset& ds,
                        double epsilon, const fs::path& outdir) {
  json j;
  j["stored_samples"] = trace.samples.size();
  double acc_a0 = 0.0;
  for (const auto& s : trace.samples) acc_a0 += s.alpha0_accepted ? 1.0 : 0.0;
  j["alpha0_acceptance_rate"] = acc_a0 / static_cast<double>(trace.samples.size());

  auto counts = cluster_count_posterior(trace);
  json freq;
  for (const auto& [k, f] : counts.frequencies()) freq[std::to_string(k)] = f;
  j["cluster_count_posterior"] = freq;
  j["modal_cluster_count"] = counts.modal_count();

  auto dahl = dahl_least_squares(trace);
  const auto& dahl_s = trace.samples[dahl.index];
  j["dahl"] = {{"index", dahl.index},
               {"distance", dahl.distance},
               {"fairness", fairness_json(report_for_sample(dahl_s, ds, epsilon))}};
  write_assignment((outdir / "dahl_assignment.csv").string(), dahl_s.z_flat);

  auto map = map_by_fair_score(trace, ds, epsilon);
  json jm;
  jm["feasible"] = map.feasible;
  if (map.feasible) {
    jm["index"] = map.index;
    jm["fair_score"] = map.score;
    write_assignment((outdir / "map_assignment.csv").string(),
                     trace.samples[map.index].z_flat);
  }
  j["map_by_fair_score"] = jm;
  return j;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw invalid_input("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

int run_fit(const InputArgs& in, HfdpConfig cfg, const std::string& mode,
            const std::string& outdir) {
  fs::create_directories(outdir);
  auto loaded = in.load();
  cfg.set_shared_niw(NiwParams::data_driven(loaded.data.points), loaded.data.r);
  cfg.validate(loaded.data.dim(), loaded.data.r);

  json doc;
  doc["command"] = "fit";
  doc["mode"] = mode;
  doc["config"] = config_json(cfg);
  doc["attribute_levels"] = loaded.level_names;
  doc["feature_names"] = loaded.feature_names;
  doc["n"] = loaded.data.n();

  if (!in.design.empty()) {
    write_dataset((fs::path(outdir) / "data.csv").string(), loaded.data.points,
                  loaded.data.labels, loaded.level_names, loaded.feature_names);
    write_assignment((fs::path(outdir) / "truth_assignment.csv").string(),
                     loaded.truth);
  }

  Rng rng(static_cast<Rng::result_type>(cfg.seed));
  if (mode == "gibbs") {
    GibbsOptions opts;
    if (loaded.beliefs) opts.beliefs = &*loaded.beliefs;
    auto trace = run_gibbs(loaded.data, cfg, rng, opts);
    save_trace((fs::path(outdir) / "trace.json").string(), trace);
    doc["gibbs"] = summarize_trace_to(trace, loaded.data, cfg.epsilon, outdir);
    std::cout << "fit: " << trace.samples.size() << " stored samples, modal cluster count "
              << doc["gibbs"]["modal_cluster_count"] << '\n';
  } else if (mode == "mcem") {
    auto res = run_mcem(loaded.data, cfg, rng);
    write_assignment((fs::path(outdir) / "mode_assignment.csv").string(), res.z_flat);
    json jm;
    jm["converged"] = res.converged;
    jm["sweeps"] = res.sweeps;
    jm["trajectory"] = res.trajectory;
    jm["effective_cluster_count"] = effective_cluster_count(res.state.m);
    jm["fairness"] = fairness_json(build_fairness_report(res.z_flat, loaded.data, cfg.epsilon));
    doc["mcem"] = jm;
    std::cout << "fit: mcem " << (res.converged ? "converged" : "stopped") << " after "
              << res.sweeps << " sweeps\n";
  } else {
    throw invalid_input("unknown mode '" + mode + "' (use gibbs or mcem)");
  }
  write_json(fs::path(outdir) / "result.json", doc);
  return 0;
}

int run_score(const InputArgs& in, const std::string& assignment_path,
              double epsilon, const std::string& outdir) {
  auto loaded = in.load();
  auto z = load_assignment(assignment_path, loaded.data.n());
  auto rep = build_fairness_report(z, loaded.data, epsilon);
  json doc;
  doc["command"] = "score";
  doc["epsilon"] = epsilon;
  doc["assignment"] = assignment_path;
  doc["fairness"] = fairness_json(rep);
  if (rep.fair_score == -kInf)
    std::cout << "fair_score -inf (outside the epsilon-fair set)\n";
  else
    std::cout << "fair_score " << detail::format_real(rep.fair_score) << " balance "
              << rep.balance.overall << '\n';
  if (!outdir.empty()) {
    fs::create_directories(outdir);
    write_json(fs::path(outdir) / "score.json", doc);
  } else {
    std::cout << doc.dump(2) << '\n';
  }
  return 0;
}

int run_calibrate(const std::vector<double>& g_grid, const std::vector<double>& b_grid,
                  int K, int r, int draws, long seed, const std::vector<int>& kl_n,
                  const std::vector<double>& kl_gammas, const std::string& outdir) {
  fs::create_directories(outdir);
  Rng rng(static_cast<Rng::result_type>(seed));
  auto summary = calibrate_grid(g_grid, b_grid, K, r, draws, rng);
  {
    std::ofstream out(fs::path(outdir) / "calibration.csv");
    out << "g,b,draws,balance_q05,balance_q25,balance_q50,balance_q75,balance_q95,"
           "kl_q05,kl_q25,kl_q50,kl_q75,kl_q95\n";
    for (const auto& row : summary.rows) {
      out << detail::format_real(row.g) << ',' << detail::format_real(row.b) << ','
          << row.draws;
      for (double q : row.balance_q) out << ',' << detail::format_real(q);
      for (double q : row.kl_q) out << ',' << detail::format_real(q);
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(outdir) / "symkl.csv");
    out << "N,gamma1,gamma2,sym_kl\n";
    for (int n : kl_n)
      for (double g1 : kl_gammas)
        for (double g2 : kl_gammas)
          out << n << ',' << detail::format_real(g1) << ',' << detail::format_real(g2)
              << ',' << detail::format_real(sym_kl_lifted_vs_bb(n, g1, g2)) << '\n';
  }
  std::cout << "calibrate: " << summary.rows.size() << " grid rows, "
            << kl_n.size() * kl_gammas.size() * kl_gammas.size() << " divergence cells\n";
  return 0;
}

int run_simulate(const std::string& design, long seed, int n_per, double pacc,
                 const std::string& outdir) {
  fs::create_directories(outdir);
  Rng rng(static_cast<Rng::result_type>(seed));
  auto sim = generate(spec_for(design, n_per, pacc), rng);
  auto levels = default_level_names(sim.data.r);
  write_dataset((fs::path(outdir) / "data.csv").string(), sim.data.points,
                sim.data.labels, levels);
  write_assignment((fs::path(outdir) / "truth_assignment.csv").string(), sim.true_z);
  if (design == "imperfect") {
    std::ofstream out(fs::path(outdir) / "beliefs.csv");
    for (int a = 0; a < sim.data.r; ++a)
      out << (a ? "," : "") << 'p' << (a + 1);
    out << '\n';
    for (int i = 0; i < sim.beliefs.probs.rows(); ++i) {
      for (int a = 0; a < sim.beliefs.probs.cols(); ++a)
        out << (a ? "," : "") << detail::format_real(sim.beliefs.probs(i, a));
      out << '\n';
    }
    write_assignment((fs::path(outdir) / "truth_attributes.csv").string(),
                     sim.true_labels);
  }
  json doc;
  doc["command"] = "simulate";
  doc["design"] = design;
  doc["seed"] = seed;
  doc["n"] = sim.data.n();
  doc["r"] = sim.data.r;
  write_json(fs::path(outdir) / "result.json", doc);
  std::cout << "simulate: wrote " << sim.data.n() << " rows\n";
  return 0;
}

int run_summarize(const InputArgs& in, const std::string& trace_path, double epsilon,
                  const std::string& outdir) {
  fs::create_directories(outdir);
  auto loaded = in.load();
  auto trace = load_trace(trace_path);
  if (trace.n != loaded.data.n())
    throw invalid_input("trace and dataset sizes disagree");
  json doc;
  doc["command"] = "summarize";
  doc["trace"] = trace_path;
  doc["epsilon"] = epsilon;
  doc["gibbs"] = summarize_trace_to(trace, loaded.data, epsilon, outdir);
  write_json(fs::path(outdir) / "result.json", doc);
  std::cout << "summarize: modal cluster count " << doc["gibbs"]["modal_cluster_count"]
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical fair clustering toolkit"};
  app.require_subcommand(1);

  InputArgs fit_in, score_in, summ_in;
  HfdpConfig cfg;
  std::string mode = "gibbs", outdir = "hfdp_out";
  std::string assignment_path, trace_path;
  double epsilon = 0.05;
  long seed = 0;

  auto* fit = app.add_subcommand("fit", "run a chain and summarize it");
  fit_in.attach(fit);
  fit->add_option("--seed", seed, "rng seed")->required();
  fit->add_option("--mode", mode, "gibbs or mcem");
  fit->add_option("--iters", cfg.iterations, "total sweeps");
  fit->add_option("--burnin", cfg.burnin, "burn-in sweeps");
  fit->add_option("--thin", cfg.thin, "thinning interval");
  fit->add_option("--K", cfg.K, "cluster cap");
  fit->add_option("--g", cfg.g, "gamma shape / dirichlet mass");
  fit->add_option("--b", cfg.b, "gamma rate");
  fit->add_option("--epsilon", cfg.epsilon, "balance budget");
  fit->add_option("--wrla-steps", cfg.wrla_steps, "inner loop steps (-1: 50 per row)");
  fit->add_option("--alpha0-step", cfg.alpha0_step, "initial proposal scale");
  fit->add_flag("--strict-z", cfg.strict_z, "metropolis-correct the z move");
  fit->add_option("--out", outdir, "output directory");

  auto* score = app.add_subcommand("score", "evaluate an external assignment");
  score_in.attach(score);
  score->add_option("--seed", score_in.seed, "rng seed (design inputs)");
  score->add_option("--assignment", assignment_path, "assignment csv")->required();
  score->add_option("--epsilon", epsilon, "balance budget");
  score->add_option("--out", outdir, "output directory (default: print)")
      ->default_val(std::string{});

  std::vector<std::string> g_grid = {"10"}, b_grid = {"0.1", "1", "10"};
  std::vector<std::string> kl_n = {"20", "50", "100", "200"};
  std::vector<std::string> kl_gammas = {"0.5", "1", "2", "5", "10"};
  int cal_K = 2, cal_r = 2, cal_draws = 10000;
  auto* cal = app.add_subcommand("calibrate", "prior calibration tables");
  cal->add_option("--g", g_grid, "g grid")->delimiter(',');
  cal->add_option("--b", b_grid, "b grid")->delimiter(',');
  cal->add_option("--K", cal_K, "cluster cap");
  cal->add_option("--r", cal_r, "attribute levels");
  cal->add_option("--draws", cal_draws, "draws per grid point");
  cal->add_option("--seed", seed, "rng seed")->required();
  cal->add_option("--kl-n", kl_n, "divergence sample sizes")->delimiter(',');
  cal->add_option("--kl-gammas", kl_gammas, "divergence gamma grid")->delimiter(',');
  cal->add_option("--out", outdir, "output directory");

  std::string design = "A1";
  int n_per = 200;
  double pacc = 0.9;
  auto* sim = app.add_subcommand("simulate", "write a simulation design");
  sim->add_option("--design", design, "A1 A2 A3 B imperfect")->required();
  sim->add_option("--seed", seed, "rng seed")->required();
  sim->add_option("--n-per", n_per, "observations per attribute level");
  sim->add_option("--pacc", pacc, "label retention probability");
  sim->add_option("--out", outdir, "output directory");

  auto* summ = app.add_subcommand("summarize", "re-summarize a stored trace");
  summ_in.attach(summ);
  summ->add_option("--seed", summ_in.seed, "rng seed (design inputs)");
  summ->add_option("--trace", trace_path, "trace json")->required();
  summ->add_option("--epsilon", epsilon, "balance budget");
  summ->add_option("--out", outdir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) {
      fit_in.seed = seed;
      cfg.seed = seed;
      return run_fit(fit_in, cfg, mode, outdir);
    }
    if (score->parsed()) return run_score(score_in, assignment_path, epsilon, outdir);
    if (cal->parsed())
      return run_calibrate(parse_doubles(g_grid), parse_doubles(b_grid), cal_K, cal_r,
                           cal_draws, seed, parse_ints(kl_n), parse_doubles(kl_gammas),
                           outdir);
    if (sim->parsed()) return run_simulate(design, seed, n_per, pacc, outdir);
    if (summ->parsed()) return run_summarize(summ_in, trace_path, epsilon, outdir);
  } catch (const numerical_degeneracy& e) {
    std::cerr << "numerical degeneracy: " << e.what() << '\n';
    return 3;
  } catch (const invalid_input& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const capacity_error& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
