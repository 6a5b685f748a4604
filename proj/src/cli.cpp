#include "metarenewal/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "metarenewal/config.hpp"
#include "metarenewal/periodic.hpp"
#include "metarenewal/renewal.hpp"
#include "metarenewal/scenarios.hpp"
#include "metarenewal/spectral.hpp"
#include "metarenewal/steady.hpp"

namespace metarenewal {

namespace {

using json = nlohmann::json;

constexpr double bound_slack = 1e-6;

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string vec(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

json to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return rows;
}

std::string pass(bool ok) { return ok ? "pass" : "FAIL"; }

class csv_table {
 public:
  explicit csv_table(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    for (double v : values) s.push_back(num(v));
    row_strings(s);
  }
  const std::string& text() const { return text_; }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::logic_error("csv row has the wrong number of cells");
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += '\n';
  }
  std::size_t columns_;
  std::string text_;
};

std::vector<std::string> patch_columns(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 1; k <= n; ++k) out.push_back(prefix + "_" + std::to_string(k));
  return out;
}

class output_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// where a command's emissions go: the human report to out, files to dir; without a directory a
// CSV table takes standard output and the report moves to standard error
class emitter {
 public:
  emitter(std::string dir, bool has_table, std::ostream& out, std::ostream& err)
      : dir_(std::move(dir)), out_(out), text_(dir_.empty() && has_table ? err : out) {}

  std::ostream& text() { return text_; }

  void json_report(const std::string& name, const json& j) {
    if (!dir_.empty()) write(name, j.dump(2) + "\n");
  }
  void table(const std::string& name, const csv_table& t) {
    if (dir_.empty())
      out_ << t.text();
    else
      write(name, t.text());
  }

 private:
  void write(const std::string& name, const std::string& content) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    auto path = std::filesystem::path(dir_) / name;
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw output_error("cannot write " + path.string());
    text_ << "wrote " << path.string() << "\n";
  }

  std::string dir_;
  std::ostream& out_;
  std::ostream& text_;
};

struct overrides {
  std::string out;
  double da = 0.0, tol = 0.0, t_end = 0.0;
  std::size_t phase_nodes = 0;
};

void apply(run_config& c, const overrides& o) {
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.da > 0.0) c.settings.da = o.da;
  if (o.tol > 0.0) c.settings.tol = o.tol;
  if (o.t_end > 0.0) c.settings.t_end = o.t_end;
  if (o.phase_nodes > 0) c.settings.phase_nodes = o.phase_nodes;
}

json report_json(const validation_report& rep) {
  json conditions = json::array();
  for (const auto& c : rep.conditions) conditions.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"passed", rep.passed()}, {"conditions", conditions}, {"column_sums_nonpositive", rep.column_sums_nonpositive}};
}

std::string failed_conditions(const validation_report& rep) {
  std::string s;
  for (const auto& c : rep.conditions)
    if (!c.passed) s += (s.empty() ? "" : ", ") + c.name;
  return s;
}

// validation gate for the analysis commands: H1-H5 are required, a failed H6 (accessibility) only
// warns because uncoupled and partially coupled models are analysed patch by patch
bool require_valid(const model_spec& model, const std::string& what, std::ostream& text) {
  auto rep = validate(model);
  std::string failed;
  for (const auto& c : rep.conditions)
    if (!c.passed && c.name != "H6") failed += (failed.empty() ? "" : ", ") + c.name;
  if (!failed.empty()) {
    text << what << " fails validation (" << failed << "); run `validate` for details\n";
    return false;
  }
  if (!rep.passed()) text << "warning: " << what << " fails H6 (" << rep.condition("H6").detail << ")\n";
  return true;
}

int cmd_validate(const run_config& c, emitter& em) {
  auto& t = em.text();
  const auto& m = c.model;
  t << "model: " << m.patches() << " patch(es), lifespan " << num(m.lifespan()) << ", fertility window ["
    << num(m.fertility_lo()) << ", " << num(m.fertility_hi()) << "]\n";
  auto rep = validate(m);
  for (const auto& cond : rep.conditions)
    t << cond.name << "  " << pass(cond.passed) << "  " << cond.detail << "\n";
  t << "column sums of D nonpositive: " << (rep.column_sums_nonpositive ? "yes" : "no") << "\n";
  t << (rep.passed() ? "valid" : "invalid: " + failed_conditions(rep) + " failed") << "\n";
  json j = report_json(rep);
  j["command"] = "validate";
  em.json_report("validate.json", j);
  return rep.passed() ? exit_ok : exit_failure;
}

int cmd_simulate(const run_config& c, emitter& em) {
  auto& t = em.text();
  const auto& m = c.model;
  if (!require_valid(m, "model", t)) return exit_failure;
  renewal_options ro;
  ro.da = c.settings.da;
  ro.tol = c.settings.tol;
  ro.max_iter = c.settings.max_iter;
  auto sol = solve_renewal(m, c.t_end(), ro);
  auto field = reconstruct_density(m, sol.rho);
  const std::size_t n = m.patches();

  auto header = patch_columns("rho", n);
  auto p_cols = patch_columns("P", n);
  header.insert(header.begin(), "t");
  header.insert(header.end(), p_cols.begin(), p_cols.end());
  csv_table table(header);
  Eigen::VectorXd last_p;
  for (std::size_t j = 0; j < sol.rho.size(); ++j) {
    double time = sol.rho.time(j);
    last_p = total_population(field, time);
    std::vector<double> row{time};
    for (std::size_t k = 0; k < n; ++k) row.push_back(sol.rho.value(j, k));
    for (std::size_t k = 0; k < n; ++k) row.push_back(last_p[static_cast<Eigen::Index>(k)]);
    table.row(row);
  }
  bool certified = !sol.certificate || sol.iterations <= *sol.certificate;
  Eigen::VectorXd last_rho = sol.rho.at(sol.rho.size() - 1);
  t << "t_end = " << num(sol.rho.end_time()) << "\n";
  t << "step = " << num(sol.rho.step()) << "\n";
  t << "iterations = " << sol.iterations << "\n";
  t << "residual = " << num(sol.residual) << "\n";
  t << "iteration bound = " << (sol.certificate ? std::to_string(*sol.certificate) : "none below tol") << "  "
    << pass(certified) << "\n";
  t << "final rho = " << vec(last_rho) << "\n";
  t << "final P = " << vec(last_p) << "\n";
  em.table("simulate.csv", table);
  json j{{"command", "simulate"},
         {"t_end", sol.rho.end_time()},
         {"step", sol.rho.step()},
         {"iterations", sol.iterations},
         {"residual", sol.residual},
         {"iteration_bound", sol.certificate ? json(*sol.certificate) : json(nullptr)},
         {"certified", certified},
         {"final_rho", to_json(last_rho)},
         {"final_P", to_json(last_p)}};
  em.json_report("simulate.json", j);
  return certified ? exit_ok : exit_failure;
}

int cmd_analyze(const run_config& c, emitter& em) {
  auto& t = em.text();
  const auto& m = c.model;
  const double da = c.settings.da;
  if (!require_valid(m, "model", t)) return exit_failure;
  if (m.time_dependent()) {
    t << "analyze needs time-independent coefficients; use the `periodic` command\n";
    return exit_failure;
  }
  bool ok = true;
  json j{{"command", "analyze"}};

  auto r0 = assemble_R0(m, da);
  t << "sigma(R0) = " << num(r0.sigma) << "\n";
  t << "Perron vector = " << vec(r0.perron_vector) << "\n";
  t << "R0 =\n";
  for (Eigen::Index i = 0; i < r0.entries.rows(); ++i) t << "  " << vec(r0.entries.row(i).transpose()) << "\n";
  j["sigma"] = r0.sigma;
  j["perron_vector"] = to_json(r0.perron_vector);
  j["R0"] = to_json(r0.entries);
  j["irreducible"] = r0.irreducible;
  if (m.dispersal().is_zero() && m.patches() > 1) {
    Eigen::VectorXd sk = r0.entries.diagonal();
    for (Eigen::Index k = 0; k < sk.size(); ++k) t << "sigma_" << k + 1 << " = " << num(sk[k]) << "\n";
    t << "note: D = 0, so R0 is diagonal and reducible; sigma(R0) is the largest patch value\n";
    j["sigma_patches"] = to_json(sk);
  } else if (!r0.irreducible) {
    t << "note: R0 is reducible; sigma(R0) comes from the dense eigen solver\n";
  }

  if (m.column_sums_nonpositive()) {
    auto sb = sigma_bounds(m, da);
    bool in = sb.lower <= r0.sigma + 1e-9 * std::max(1.0, r0.sigma) && r0.sigma <= sb.upper + 1e-9 * std::max(1.0, r0.sigma);
    ok = ok && in;
    t << "sigma bounds: " << num(sb.lower) << " <= sigma <= " << num(sb.upper) << "  " << pass(in) << "\n";
    j["sigma_bounds"] = {{"lower", sb.lower}, {"upper", sb.upper}, {"passed", in}};
  } else {
    t << "sigma bounds: not applicable (column sums of D are not all nonpositive)\n";
    j["sigma_bounds"] = "not applicable";
  }

  steady_options so;
  so.da = da;
  so.tol = c.settings.tol;
  so.margin = c.settings.margin;
  if (c.settings.max_iter > 0) so.max_iter = c.settings.max_iter;
  auto st = classify(m, so);
  t << "classification = " << to_string(st.classification) << "\n";
  t << "theta = " << vec(st.theta) << "\n";
  t << "asymptotic total P = " << vec(st.asymptotic_total) << "\n";
  j["classification"] = to_string(st.classification);
  j["theta"] = to_json(st.theta);
  j["asymptotic_total"] = to_json(st.asymptotic_total);
  j["converged"] = st.converged;
  if (!st.converged) {
    t << "warning: the marginal iteration did not settle within its bound\n";
    ok = false;
  }

  try {
    auto up = theta_upper_bound(m, da);
    if (up) {
      bool in = st.theta.sum() <= *up + bound_slack;
      ok = ok && in;
      t << "theta_plus = " << num(*up) << ", sum theta = " << num(st.theta.sum()) << "  " << pass(in) << "\n";
      j["theta_plus"] = {{"value", *up}, {"passed", in}};
    } else {
      t << "theta_plus: vacuous (no positive root)\n";
      j["theta_plus"] = "vacuous";
    }
  } catch (const precondition_error& e) {
    t << "theta_plus: not applicable (" << e.what() << ")\n";
    j["theta_plus"] = "not applicable";
  }
  json lows = json::array();
  for (std::size_t k = 0; k < m.patches(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    try {
      auto lo = theta_lower_bound(m, k, std::nullopt, da);
      if (lo) {
        bool in = *lo <= st.theta[kk] + bound_slack;
        ok = ok && in;
        t << "theta_minus_" << k + 1 << " = " << num(*lo) << " <= theta_" << k + 1 << " = " << num(st.theta[kk]) << "  "
          << pass(in) << "\n";
        lows.push_back({{"value", *lo}, {"passed", in}});
      } else {
        t << "theta_minus_" << k + 1 << ": vacuous (no positive root)\n";
        lows.push_back("vacuous");
      }
    } catch (const precondition_error& e) {
      t << "theta_minus_" << k + 1 << ": not applicable (" << e.what() << ")\n";
      lows.push_back("not applicable");
    }
  }
  j["theta_minus"] = lows;

  if (c.perturbation) {
    auto pr = perturbed_sigma(m, *c.perturbation, c.settings.eps_ladder, da);
    t << "perturbation: dominant patch " << pr.source + 1 << ", sigma_isolated = " << vec(pr.sigma_isolated)
      << ", correction = " << num(pr.correction) << "\n";
    json pts = json::array();
    for (const auto& p : pr.points) {
      t << "  eps = " << num(p.eps) << "  sigma = " << num(p.sigma_exact) << "  predicted = " << num(p.sigma_predicted)
        << "  remainder = " << num(p.remainder) << "\n";
      pts.push_back({{"eps", p.eps}, {"sigma", p.sigma_exact}, {"predicted", p.sigma_predicted}, {"remainder", p.remainder}});
    }
    t << "  remainder slope = " << num(pr.remainder_slope) << "\n";
    j["perturbation"] = {{"source", pr.source + 1},
                         {"sigma_isolated", to_json(pr.sigma_isolated)},
                         {"correction", pr.correction},
                         {"points", pts},
                         {"remainder_slope", std::isnan(pr.remainder_slope) ? json(nullptr) : json(pr.remainder_slope)}};
  }
  j["passed"] = ok;
  em.json_report("analyze.json", j);
  return ok ? exit_ok : exit_failure;
}

int cmd_periodic(const run_config& c, emitter& em) {
  auto& t = em.text();
  const auto& m = c.model;
  if (!require_valid(m, "model", t)) return exit_failure;
  const std::size_t nodes = c.settings.phase_nodes;
  json j{{"command", "periodic"}, {"period", model_period(m)}, {"nodes", nodes}};
  t << "period = " << num(model_period(m)) << ", phase nodes = " << nodes << "\n";
  try {
    auto r0 = assemble_periodic_R0(m, nodes, c.settings.da);
    t << "sigma(R0~) = " << num(r0.sigma) << "\n";
    j["sigma"] = r0.sigma;
  } catch (const reducible_matrix& e) {
    t << "sigma(R0~): not available (" << e.what() << ")\n";
    j["sigma"] = nullptr;
  }
  periodic_options po;
  po.da = c.settings.da;
  po.tol = c.settings.tol;
  if (c.settings.max_iter > 0) po.max_iter = c.settings.max_iter;
  auto sol = periodic_maximal_solution(m, nodes, po);
  t << "iterations = " << sol.iterations << "\n";
  t << "residual = " << num(sol.residual) << "\n";
  t << "theta(0) = " << vec(sol.theta.sample(0)) << "\n";

  auto header = patch_columns("theta", m.patches());
  header.insert(header.begin(), "phase");
  csv_table table(header);
  json samples = json::array();
  for (std::size_t p = 0; p < sol.theta.nodes(); ++p) {
    std::vector<double> row{sol.theta.phase(p)};
    for (std::size_t k = 0; k < m.patches(); ++k) row.push_back(sol.theta.value(p, k));
    table.row(row);
    samples.push_back(to_json(sol.theta.sample(p)));
  }
  em.table("periodic.csv", table);
  j["iterations"] = sol.iterations;
  j["residual"] = sol.residual;
  j["theta"] = samples;
  em.json_report("periodic.json", j);
  return exit_ok;
}

int cmd_envelope(const run_config& c, emitter& em) {
  auto& t = em.text();
  const auto& m = c.model;
  if (!c.envelope) throw config_error("/envelope", "the envelope command needs an envelope section");
  const auto& pair = *c.envelope;
  json j{{"command", "envelope"}};

  auto issues = check_envelope(pair, m, c.t_end());
  if (!issues.empty()) {
    t << "envelope is malformed:\n";
    for (const auto& s : issues) t << "  " << s << "\n";
    j["malformed"] = issues;
    em.json_report("envelope.json", j);
    return exit_failure;
  }
  if (!require_valid(m, "model", t) || !require_valid(pair.lower_model, "lower envelope", t) ||
      !require_valid(pair.upper_model, "upper envelope", t))
    return exit_failure;

  envelope_options eo;
  eo.nodes = c.settings.phase_nodes;
  eo.da = c.settings.da;
  eo.tol = c.settings.tol;
  eo.check_from = c.settings.check_from;
  eo.check_eps = c.settings.check_eps;
  eo.decay_tol = c.settings.decay_tol;
  auto r = envelope_bounds(pair, m, c.t_end(), eo);

  t << "case = " << to_string(r.kind) << " (" << r.note << ")\n";
  t << "sigma upper envelope = " << num(r.sigma_upper) << "\n";
  j["case"] = to_string(r.kind);
  j["note"] = r.note;
  j["sigma_upper"] = r.sigma_upper;
  if (r.kind != envelope_case::extinction) {
    t << "sigma lower envelope = " << num(r.sigma_lower) << "\n";
    j["sigma_lower"] = r.sigma_lower;
  }
  if (r.kind == envelope_case::extinction) {
    t << "final window max = " << num(r.final_window_max) << " (threshold " << num(eo.decay_tol) << ")\n";
    j["final_window_max"] = r.final_window_max;
  }
  if (r.kind == envelope_case::sandwich) {
    t << "check: t > " << num(r.check_from) << " with eps = " << num(r.check_eps) << ", violations = "
      << r.violations.size() << "\n";
    if (r.witness_T2)
      t << "witness: T2 = " << num(*r.witness_T2) << ", eps = " << num(*r.witness_eps) << "\n";
    else
      t << "witness: none found\n";
    json viol = json::array();
    for (std::size_t i = 0; i < r.violations.size(); ++i) {
      const auto& v = r.violations[i];
      if (i < 20)
        t << "  t = " << num(v.t) << " patch " << v.patch + 1 << ": " << num(v.lower) << " <= " << num(v.value)
          << " <= " << num(v.upper) << " fails\n";
      viol.push_back({{"t", v.t}, {"patch", v.patch + 1}, {"value", v.value}, {"lower", v.lower}, {"upper", v.upper}});
    }
    if (r.violations.size() > 20) t << "  ... " << r.violations.size() - 20 << " more\n";
    j["check_from"] = r.check_from;
    j["check_eps"] = r.check_eps;
    j["violations"] = viol;
    j["witness"] = r.witness_T2 ? json{{"T2", *r.witness_T2}, {"eps", *r.witness_eps}} : json(nullptr);
  }
  t << "result: " << (r.kind == envelope_case::inconclusive ? "inconclusive" : pass(r.passed)) << "\n";
  j["passed"] = r.passed;

  const std::size_t n = m.patches();
  const bool bounds = r.rho_minus && r.rho_plus;
  auto header = patch_columns("rho", n);
  header.insert(header.begin(), "t");
  if (bounds) {
    auto lo = patch_columns("lower", n), hi = patch_columns("upper", n);
    header.insert(header.end(), lo.begin(), lo.end());
    header.insert(header.end(), hi.begin(), hi.end());
  }
  csv_table table(header);
  if (r.kind != envelope_case::inconclusive) {
    for (std::size_t q = 0; q < r.chi.size(); ++q) {
      double time = r.chi.time(q);
      std::vector<double> row{time};
      for (std::size_t k = 0; k < n; ++k) row.push_back(r.chi.value(q, k));
      if (bounds) {
        Eigen::VectorXd lo = (*r.rho_minus)(time), hi = (*r.rho_plus)(time);
        row.insert(row.end(), lo.data(), lo.data() + lo.size());
        row.insert(row.end(), hi.data(), hi.data() + hi.size());
      }
      table.row(row);
    }
  }
  em.table("envelope.csv", table);
  em.json_report("envelope.json", j);
  return r.kind == envelope_case::inconclusive || r.passed ? exit_ok : exit_failure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Analysis of age-structured metapopulation renewal models", "metarenewal"};
  app.require_subcommand(1, 1);
  std::string config_path;
  overrides ov;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "check the model hypotheses"},
      {"simulate", "solve the renewal equation and write the newborn and population time series"},
      {"analyze", "net reproductive rate, bounds, steady state and classification"},
      {"periodic", "periodic net reproductive rate and periodic maximal solution"},
      {"envelope", "sandwich a model between the periodic solutions of its envelopes"}};
  for (const auto& [name, desc] : commands) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", ov.out, "output directory for reports and tables");
    sub->add_option("--da", ov.da, "age step")->check(CLI::PositiveNumber);
    sub->add_option("--tol", ov.tol, "iteration tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tend", ov.t_end, "simulation horizon")->check(CLI::PositiveNumber);
    sub->add_option("--phase-nodes", ov.phase_nodes, "phase nodes per period")->check(CLI::PositiveNumber);
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_input_error;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    auto config = load_config(config_path);
    apply(config, ov);
    const bool has_table = command == "simulate" || command == "periodic" || command == "envelope";
    emitter em(config.output_dir, has_table, out, err);
    if (command == "validate") return cmd_validate(config, em);
    if (command == "simulate") return cmd_simulate(config, em);
    if (command == "analyze") return cmd_analyze(config, em);
    if (command == "periodic") return cmd_periodic(config, em);
    return cmd_envelope(config, em);
  } catch (const config_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const output_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const structural_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const non_convergence& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  } catch (const error& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace metarenewal
