// Command-line front end: simulate | train | evaluate | pair | merge | bound |
// epr-demo | sweep. Exit codes: 0 success, 1 computation failure, 2 usage or
// configuration error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "llp/bags.hpp"
#include "llp/bounds.hpp"
#include "llp/data.hpp"
#include "llp/eval.hpp"
#include "llp/io.hpp"
#include "llp/loss.hpp"
#include "llp/pairing.hpp"
#include "llp/train.hpp"

namespace {

using namespace llp;

const std::map<std::string, BagModel> kBagModels{{"instance", BagModel::instance}, {"bag", BagModel::bag}};
const std::map<std::string, WeightMode> kWeightModes{{"bag", WeightMode::bag}, {"instance", WeightMode::instance}};
const std::map<std::string, PairingMethod> kPairings{{"optimal", PairingMethod::optimal}, {"sorted", PairingMethod::sorted}};
const std::map<std::string, MergeScheme> kSchemes{{"bp", MergeScheme::blockwise_pairwise},
                                                  {"bm", MergeScheme::blockwise_max}};
const std::map<std::string, IndependenceModel> kIndependence{{"instance", IndependenceModel::instance},
                                                             {"bag", IndependenceModel::bag}};

struct LpOptions {
  std::string kind = "uniform";
  double lo = 0.0;
  double hi = 0.5;
  double value = 0.5;
  double step = 0.5;

  LPDistribution resolve() const {
    LPDistribution d;
    if (kind == "uniform")
      d = UniformLP{lo, hi};
    else if (kind == "constant")
      d = ConstantLP{value};
    else
      d = WalkLP{step, value};
    validate(d);
    return d;
  }

  void add(CLI::App* app) {
    app->add_option("--lp-dist", kind, "Label proportion distribution")
        ->check(CLI::IsMember({"uniform", "constant", "walk"}))
        ->capture_default_str();
    app->add_option("--lp-lo", lo, "Uniform lower end")->capture_default_str();
    app->add_option("--lp-hi", hi, "Uniform upper end")->capture_default_str();
    app->add_option("--lp-value", value, "Constant value, or walk start")->capture_default_str();
    app->add_option("--lp-step", step, "Walk innovation scale")->capture_default_str();
  }
};

struct GaussianOptions {
  std::size_t dim = 2;
  double mu = 1.0;
  double scale = 1.0;

  void add(CLI::App* app) {
    app->add_option("--dim", dim, "Feature dimension")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--mu", mu, "Class means are +mu*1 and -mu*1")->capture_default_str();
    app->add_option("--scale", scale, "Per-coordinate standard deviation")->check(CLI::PositiveNumber)->capture_default_str();
  }
};

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

// Options of the chosen subcommand as given on the command line or in --config,
// defaults included. Replays with `llp --config config.ini <subcommand>`.
void write_resolved_config(const CLI::App* sub, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.ini");
  if (!out) throw usage_error("cannot write " + (dir / "config.ini").string());
  out << "# llp --config config.ini " << sub->get_name() << "\n[" << sub->get_name() << "]\n";
  std::istringstream lines(sub->config_to_str(true, false));
  for (std::string line; std::getline(lines, line);)
    if (line.find("=\"\"") == std::string::npos) out << line << '\n';
}

std::vector<BagSummary> summaries_from(const std::string& bag_dir, const std::vector<double>& lps,
                                       const std::vector<std::size_t>& sizes) {
  if (!bag_dir.empty()) {
    if (!lps.empty()) throw usage_error("give either --bags or --lps, not both");
    const auto bags = read_bag_directory(bag_dir);
    return summarize(bags);
  }
  if (lps.empty()) throw usage_error("need --bags or --lps");
  if (!sizes.empty() && sizes.size() != 1 && sizes.size() != lps.size())
    throw usage_error("--sizes needs one value or one per bag");
  std::vector<BagSummary> out;
  for (std::size_t i = 0; i < lps.size(); ++i) {
    if (!(lps[i] >= 0.0 && lps[i] <= 1.0)) throw usage_error("proportions must lie in [0, 1]");
    const std::size_t n = sizes.empty() ? 1 : sizes.size() == 1 ? sizes[0] : sizes[i];
    if (n == 0) throw usage_error("bag sizes must be positive");
    out.push_back({lps[i], n});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning from label proportions via mutual contamination models"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key = value file");

  // simulate ---------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Generate a bag manifest directory from synthetic or CSV data");
  std::string sim_out;
  std::uint64_t sim_seed = 0;
  std::size_t sim_bag_size = 8, sim_total = 1024, sim_test = 1000;
  std::optional<std::size_t> sim_bags;
  std::string sim_model = "instance", sim_csv, sim_schema;
  double sim_rho = 0.0;
  LpOptions sim_lp;
  GaussianOptions sim_g;
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--seed", sim_seed, "Top-level seed")->capture_default_str();
  sim->add_option("--bag-size", sim_bag_size, "Instances per bag")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--total", sim_total, "Training instances T; bags = T / bag size")->capture_default_str();
  sim->add_option("--num-bags", sim_bags, "Fix the number of bags instead of T");
  sim->add_option("--model", sim_model, "Independence model")->check(CLI::IsMember({"instance", "bag"}))->capture_default_str();
  sim->add_option("--rho", sim_rho, "Within-bag label correlation (bag model)")->capture_default_str();
  sim->add_option("--test-per-class", sim_test, "Held-out instances per class (synthetic)")->capture_default_str();
  sim->add_option("--csv", sim_csv, "Labeled CSV to draw bags from instead of Gaussians");
  sim->add_option("--schema", sim_schema, "Schema file for --csv");
  sim_lp.add(sim);
  sim_g.add(sim);

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Fit a kernel classifier on a bag manifest");
  std::string tr_bags, tr_out, tr_loss = "logistic", tr_pairing = "optimal", tr_weights = "bag", tr_merge = "none";
  std::size_t tr_k = 1, tr_folds = 5;
  std::uint64_t tr_seed = 0;
  std::vector<double> tr_lambdas{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  std::optional<double> tr_bandwidth;
  tr->add_option("--bags", tr_bags, "Bag manifest directory")->required();
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--loss", tr_loss, "Base loss")->check(CLI::IsMember({"logistic", "sigmoid", "ramp", "squared"}))->capture_default_str();
  tr->add_option("--pairing", tr_pairing, "Bag pairing")->check(CLI::IsMember({"optimal", "sorted"}))->capture_default_str();
  tr->add_option("--weights", tr_weights, "Pair weights: bag (gap^2) or instance (nbar gap^2)")
      ->check(CLI::IsMember({"bag", "instance"}))
      ->capture_default_str();
  tr->add_option("--merge", tr_merge, "Merging scheme")->check(CLI::IsMember({"none", "bp", "bm"}))->capture_default_str();
  tr->add_option("--k", tr_k, "Small bags per merged bag")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--lambdas", tr_lambdas, "Regularization grid")->delimiter(',')->capture_default_str();
  tr->add_option("--folds", tr_folds, "Cross-validation folds")->capture_default_str();
  tr->add_option("--seed", tr_seed, "Top-level seed")->capture_default_str();
  tr->add_option("--bandwidth", tr_bandwidth, "Gaussian kernel bandwidth (default 1 / (d Var X))");
  std::optional<double> tr_fallback;
  tr->add_option("--fallback-lambda", tr_fallback, "lambda when there are too few pairs for CV (default: largest grid value)");

  // evaluate ---------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Score a model on labeled test data");
  std::string ev_model, ev_test, ev_out;
  ev->add_option("--model", ev_model, "Model file")->required();
  ev->add_option("--test", ev_test, "CSV with features and a +1/-1 label column, or a bag directory holding test.csv")
      ->required();
  ev->add_option("--out", ev_out, "Output directory for metrics.json and roc.csv");

  // pair / merge -----------------------------------------------------------
  auto* pr = app.add_subcommand("pair", "Pair bags by maximum weighted matching");
  std::string pr_bags, pr_method = "optimal", pr_weights = "bag", pr_out;
  std::vector<double> pr_lps;
  std::vector<std::size_t> pr_sizes;
  pr->add_option("--bags", pr_bags, "Bag manifest directory");
  pr->add_option("--lps", pr_lps, "Observed proportions, instead of --bags")->delimiter(',');
  pr->add_option("--sizes", pr_sizes, "Bag sizes for --lps (one value or one per bag; default 1)")->delimiter(',');
  pr->add_option("--method", pr_method, "Pairing method")->check(CLI::IsMember({"optimal", "sorted"}))->capture_default_str();
  pr->add_option("--weights", pr_weights, "Weight mode")->check(CLI::IsMember({"bag", "instance"}))->capture_default_str();
  pr->add_option("--out", pr_out, "Also write the report to this directory");

  auto* mg = app.add_subcommand("merge", "Merge blocks of 2K bags into K-merged pairs");
  std::string mg_bags, mg_scheme = "bm", mg_weights = "bag", mg_out;
  std::vector<double> mg_lps;
  std::vector<std::size_t> mg_sizes;
  std::size_t mg_k = 1;
  mg->add_option("--bags", mg_bags, "Bag manifest directory");
  mg->add_option("--lps", mg_lps, "Observed proportions, instead of --bags")->delimiter(',');
  mg->add_option("--sizes", mg_sizes, "Bag sizes for --lps")->delimiter(',');
  mg->add_option("--k", mg_k, "Small bags per merged bag")->check(CLI::PositiveNumber)->capture_default_str();
  mg->add_option("--scheme", mg_scheme, "Merging scheme")->check(CLI::IsMember({"bp", "bm"}))->capture_default_str();
  mg->add_option("--weights", mg_weights, "Weight mode")->check(CLI::IsMember({"bag", "instance"}))->capture_default_str();
  mg->add_option("--out", mg_out, "Also write the report to this directory");

  // bound ------------------------------------------------------------------
  auto* bd = app.add_subcommand("bound", "Evaluate a generalization bound");
  int bd_theorem = 1;
  std::vector<double> bd_kp, bd_km, bd_nbar, bd_w, bd_gaps;
  bool bd_optimal = false;
  double bd_lip = 1.0, bd_delta = 0.05, bd_a = 1.0, bd_b = 1.0, bd_eps = 0.05;
  std::string bd_model = "instance";
  std::size_t bd_k = 1, bd_n = 1, bd_bag = 1;
  std::optional<double> bd_lp_delta, bd_lp_tau, bd_lp_eps0;
  bd->add_option("--theorem", bd_theorem, "1: pairwise bound, 2: merged bound")->check(CLI::IsMember({1, 2}))->capture_default_str();
  bd->add_option("--kappa-plus", bd_kp, "Per-pair kappa+")->delimiter(',');
  bd->add_option("--kappa-minus", bd_km, "Per-pair kappa-")->delimiter(',');
  bd->add_option("--nbar", bd_nbar, "Per-pair harmonic mean bag size")->delimiter(',');
  bd->add_option("--weights", bd_w, "Per-pair weights")->delimiter(',');
  bd->add_flag("--optimal-weights", bd_optimal, "Use the bound-minimizing weights");
  bd->add_option("--gaps", bd_gaps, "Merged-pair proportion gaps (theorem 2)")->delimiter(',');
  bd->add_option("--epsilon", bd_eps, "Deviation allowance (theorem 2)")->capture_default_str();
  bd->add_option("--k", bd_k, "K (theorem 2)")->capture_default_str();
  bd->add_option("--n-pairs", bd_n, "N (theorem 2)")->capture_default_str();
  bd->add_option("--bag-size", bd_bag, "n (theorem 2)")->capture_default_str();
  bd->add_option("--lp-delta", bd_lp_delta, "LP margin Delta (theorem 2)");
  bd->add_option("--lp-tau", bd_lp_tau, "LP tau (theorem 2)");
  bd->add_option("--lp-eps0", bd_lp_eps0, "LP eps0 (theorem 2)");
  bd->add_option("--lipschitz", bd_lip, "Lipschitz constant of the base loss")->capture_default_str();
  bd->add_option("--delta", bd_delta, "Confidence parameter")->capture_default_str();
  bd->add_option("--a", bd_a, "Function-class constant A")->capture_default_str();
  bd->add_option("--b", bd_b, "Function-class constant B")->capture_default_str();
  bd->add_option("--model", bd_model, "Independence model")->check(CLI::IsMember({"instance", "bag"}))->capture_default_str();

  // epr-demo ---------------------------------------------------------------
  auto* ep = app.add_subcommand("epr-demo", "Threshold example where proportion risk picks the wrong classifier");
  double ep_p = 1.0;
  ep->add_option("--p", ep_p, "Exponent of the proportion discrepancy")->capture_default_str();

  // sweep ------------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "Consistency sweep with K = ceil(sqrt N)");
  SweepConfig swc;
  swc.classes = symmetric_gaussians(1, 1.0, 1.0);
  std::string sw_out, sw_scheme = "bm", sw_model = "bag";
  std::vector<std::size_t> sw_schedule = swc.schedule;
  LpOptions sw_lp;
  sw_lp.lo = 0.0;
  sw_lp.hi = 1.0;
  GaussianOptions sw_g;
  sw_g.dim = 1;
  sw->add_option("--out", sw_out, "Output directory");
  sw->add_option("--schedule", sw_schedule, "Values of N (pairs of small bags)")->delimiter(',')->capture_default_str();
  sw->add_option("--bag-size", swc.bag_size, "Instances per small bag")->check(CLI::PositiveNumber)->capture_default_str();
  sw->add_option("--scheme", sw_scheme, "Merging scheme")->check(CLI::IsMember({"bp", "bm"}))->capture_default_str();
  sw->add_option("--model", sw_model, "Independence model")->check(CLI::IsMember({"instance", "bag"}))->capture_default_str();
  sw->add_option("--rho", swc.rho, "Within-bag label correlation (bag model)")->capture_default_str();
  sw->add_option("--lambda-scale", swc.lambda_scale, "lambda = scale * sqrt(log M / M)")->capture_default_str();
  sw->add_option("--test-per-class", swc.test_per_class, "Test instances per class")->capture_default_str();
  sw->add_option("--seed", swc.seed, "Top-level seed")->capture_default_str();
  sw_lp.add(sw);
  sw_g.add(sw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      if (sim_rho < 0.0 || sim_rho > 1.0) throw usage_error("--rho must lie in [0, 1]");
      const auto lps = sim_lp.resolve();
      write_resolved_config(sim, sim_out);
      std::vector<Bag> bags;
      LabeledSample test;
      json summary;
      if (!sim_csv.empty()) {
        if (sim_schema.empty()) throw usage_error("--csv needs --schema");
        const Dataset ds = load_csv(sim_csv, load_schema(sim_schema));
        const auto design = sim_bags ? AssemblyDesign::fixed_bags : AssemblyDesign::fixed_total;
        const auto a = assemble_bags(ds.labels, sim_bag_size, lps, sim_bags ? *sim_bags : sim_total, sim_seed, design);
        std::vector<std::size_t> train_rows;
        for (const auto& r : a.bag_rows) train_rows.insert(train_rows.end(), r.begin(), r.end());
        const auto prep = Preprocessor::fit(select_rows(ds, train_rows));
        const Matrix features = prep.transform(ds);
        bags = materialize_bags(a, features, ds.labels, false);
        test = materialize_rows(a.test_rows, features, ds.labels);
        summary["dropped_rows"] = ds.dropped_rows;
      } else {
        if (sim_bags && *sim_bags == 0) throw usage_error("--num-bags must be positive");
        if (!sim_bags && sim_total % sim_bag_size != 0) throw usage_error("--total must be a multiple of --bag-size");
        SimulationSpec spec{symmetric_gaussians(sim_g.dim, sim_g.mu, sim_g.scale), lps, sim_bag_size,
                            sim_bags ? *sim_bags : sim_total / sim_bag_size, kBagModels.at(sim_model), sim_rho};
        bags = simulate_bags(spec, sim_seed);
        test = sample_labeled(spec.classes, sim_test, derive_seed(sim_seed, "test"));
      }
      write_bag_directory(sim_out, bags, &test);
      summary["bags"] = bags.size();
      summary["bag_size"] = sim_bag_size;
      summary["test_instances"] = test.instances.size();
      summary["out"] = sim_out;
      print(summary);
    } else if (tr->parsed()) {
      TrainConfig cfg;
      cfg.lambdas = tr_lambdas;
      cfg.folds = tr_folds;
      cfg.seed = tr_seed;
      cfg.bandwidth = tr_bandwidth;
      cfg.fallback_lambda = tr_fallback;
      cfg.pipeline.loss = parse_loss_kind(tr_loss);
      cfg.pipeline.pairing = kPairings.at(tr_pairing);
      cfg.pipeline.weights = kWeightModes.at(tr_weights);
      if (tr_merge != "none") cfg.pipeline.merge = MergeConfig{kSchemes.at(tr_merge), tr_k};
      cfg.validate();
      const auto bags = read_bag_directory(tr_bags);
      write_resolved_config(tr, tr_out);
      const auto result = train_llp(bags, cfg);
      json report = train_report(result);
      const fs::path test_path = fs::path(tr_bags) / "test.csv";
      if (fs::exists(test_path)) {
        const auto test = read_labeled_csv(test_path);
        const Vector s = result.model.scores(std::span<const FeatureVector>(test.instances));
        const std::vector<double> scores(s.data(), s.data() + s.size());
        report["test"] = {{"auc", roc_auc(scores, test.labels)}, {"ber", ber(scores, test.labels)}};
      }
      write_json(fs::path(tr_out) / "model.json", model_to_json(result.model));
      write_json(fs::path(tr_out) / "report.json", report);
      print({{"lambda", result.lambda},
             {"iterations", result.fit.iterations},
             {"final_objective", result.fit.value},
             {"test", report.contains("test") ? report["test"] : json(nullptr)}});
    } else if (ev->parsed()) {
      const auto model = model_from_json(read_json(ev_model));
      fs::path test_path = ev_test;
      if (fs::is_directory(test_path)) test_path /= "test.csv";
      const auto test = read_labeled_csv(test_path);
      const Vector s = model.scores(std::span<const FeatureVector>(test.instances));
      const std::vector<double> scores(s.data(), s.data() + s.size());
      const json metrics{{"auc", roc_auc(scores, test.labels)}, {"ber", ber(scores, test.labels)}, {"n", scores.size()}};
      if (!ev_out.empty()) {
        write_resolved_config(ev, ev_out);
        write_json(fs::path(ev_out) / "metrics.json", metrics);
        write_roc_csv(fs::path(ev_out) / "roc.csv", roc_curve(scores, test.labels));
      }
      print(metrics);
    } else if (pr->parsed()) {
      const auto bags = summaries_from(pr_bags, pr_lps, pr_sizes);
      const auto pairing = pair_bags(bags, kPairings.at(pr_method));
      const auto weights = optimal_weights(pairing.pairs, kWeightModes.at(pr_weights));
      const json report = pairing_to_json(pairing, weights);
      if (!pr_out.empty()) {
        write_resolved_config(pr, pr_out);
        write_json(fs::path(pr_out) / "pairing.json", report);
      }
      print(report);
    } else if (mg->parsed()) {
      const auto bags = summaries_from(mg_bags, mg_lps, mg_sizes);
      const auto merged = merge(bags, mg_k, kSchemes.at(mg_scheme));
      std::vector<double> gaps, scales;
      for (const auto& m : merged) {
        gaps.push_back(m.gap());
        scales.push_back(mg_weights == "instance" ? m.nbar() : 1.0);
      }
      const json report = merge_to_json(merged, optimal_weights(gaps, scales));
      if (!mg_out.empty()) {
        write_resolved_config(mg, mg_out);
        write_json(fs::path(mg_out) / "merge.json", report);
      }
      print(report);
    } else if (bd->parsed()) {
      const SRConstants sr{bd_a, bd_b};
      if (bd_theorem == 1) {
        const std::size_t m = bd_kp.size();
        if (m == 0 || bd_km.size() != m) throw usage_error("--kappa-plus and --kappa-minus need one value per pair");
        const auto expand = [&](const std::vector<double>& v, double dflt, const char* name) {
          if (v.empty()) return std::vector<double>(m, dflt);
          if (v.size() == 1) return std::vector<double>(m, v[0]);
          if (v.size() != m) throw usage_error(std::string(name) + " needs one value or one per pair");
          return v;
        };
        Theorem1Inputs in;
        in.lipschitz = bd_lip;
        in.delta = bd_delta;
        in.model = kIndependence.at(bd_model);
        const auto nbar = expand(bd_nbar, 1.0, "--nbar");
        for (std::size_t i = 0; i < m; ++i) in.pairs.push_back({{bd_kp[i], bd_km[i]}, nbar[i], 0.0});
        if (bd_optimal) {
          if (!bd_w.empty()) throw usage_error("give either --weights or --optimal-weights");
          const auto w = theorem1_optimal_weights(in.pairs, in.model);
          for (std::size_t i = 0; i < m; ++i) in.pairs[i].weight = w[i];
        } else {
          if (bd_w.empty()) throw usage_error("need --weights or --optimal-weights");
          const auto w = expand(bd_w, 0.0, "--weights");
          for (std::size_t i = 0; i < m; ++i) in.pairs[i].weight = w[i];
        }
        auto j = theorem1_to_json(geb_theorem1(in, sr));
        std::vector<double> ws;
        for (const auto& p : in.pairs) ws.push_back(p.weight);
        j["weights"] = ws;
        print(j);
      } else {
        Theorem2Inputs in;
        in.gaps = bd_gaps;
        in.epsilon = bd_eps;
        in.k = bd_k;
        in.n_pairs = bd_n;
        in.bag_size = bd_bag;
        in.lipschitz = bd_lip;
        in.delta = bd_delta;
        in.model = kIndependence.at(bd_model);
        in.lp_delta = bd_lp_delta;
        in.lp_tau = bd_lp_tau;
        in.lp_eps0 = bd_lp_eps0;
        print(theorem2_to_json(geb_theorem2(in, sr)));
      }
    } else if (ep->parsed()) {
      const auto r = epr_counterexample(ep_p);
      print({{"t_epr", r.t_epr},
             {"t_ber", r.t_ber},
             {"ber_at_t_epr", r.ber_at_epr},
             {"ber_at_t_ber", r.ber_at_ber},
             {"ber_gap", r.ber_at_epr - r.ber_at_ber},
             {"epr_at_t_epr", r.epr_at_epr}});
    } else if (sw->parsed()) {
      swc.classes = symmetric_gaussians(sw_g.dim, sw_g.mu, sw_g.scale);
      swc.lps = sw_lp.resolve();
      swc.schedule = sw_schedule;
      swc.scheme = kSchemes.at(sw_scheme);
      swc.model = kBagModels.at(sw_model);
      const auto rows = consistency_sweep(swc);
      const json j = sweep_to_json(rows, bayes_ber_symmetric_gaussians(sw_g.dim, sw_g.mu, sw_g.scale));
      if (!sw_out.empty()) {
        write_resolved_config(sw, sw_out);
        write_json(fs::path(sw_out) / "sweep.json", j);
      }
      print(j);
    }
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const compute_error& e) {
    std::cerr << "computation failed: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "computation failed: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
