#include "ra/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ra/error.hpp"

namespace ra {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  if (!doc.is_object()) fail(ErrorCode::Parse, where + " must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (!allowed.count(key)) fail(ErrorCode::Parse, "unknown key '" + key + "' in " + where);
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "'" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

std::string csv_cell(std::optional<double> x) { return x ? format_number(*x) : std::string(); }

std::string csv_row(const IterateRecord& r) {
  std::string row = std::to_string(r.iteration);
  for (double x : {r.vc_hat, r.alpha_lower, r.beta_upper, r.m_hat, r.gamma, r.grad_norm}) {
    row += ',';
    row += format_number(x);
  }
  row += ',' + csv_cell(r.vr_exact) + ',' + csv_cell(r.vc_exact) + ',' + csv_cell(r.wall_ms);
  return row;
}

// Logit `z` on the action maximizing the attainable reach-avoid probability
// wherever the actions are not tied.
std::vector<double> slater_logits(const SoftmaxPolicy& policy, const AugmentedMdp& aug, double z) {
  const FiniteMdp& mdp = aug.mdp;
  const int S = mdp.num_states();
  const int A = mdp.num_actions();
  std::vector<double> theta(policy.dimension(), 0.0);
  std::vector<double> u(aug.terminal_constraint.begin(), aug.terminal_constraint.end());
  std::vector<double> nu(S);
  std::vector<double> q(A);
  for (int t = mdp.horizon() - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const auto row = mdp.row(s, a);
        q[a] = 0.0;
        for (int j = 0; j < S; ++j) q[a] += row[j] * u[j];
      }
      const auto best = std::max_element(q.begin(), q.end());
      const auto worst = std::min_element(q.begin(), q.end());
      nu[s] = *best;
      if (*best > *worst + 1e-12) theta[policy.param_index(t, s, static_cast<int>(best - q.begin()))] = z;
    }
    std::swap(u, nu);
  }
  return theta;
}

json values_json(std::pair<double, double> v) { return {{"vr", v.first}, {"vc", v.second}}; }

std::pair<double, double> exact_pair(const AugmentedMdp& aug, const SoftmaxPolicy& policy) {
  const ValuePair v = exact_initial_values(aug, policy.table());
  return {v.reward, v.constraint};
}

std::vector<std::vector<double>> read_thetas(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "missing '" + path.string() + "'");
  std::vector<std::vector<double>> thetas;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      thetas.push_back(json::parse(line).at("theta").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, "'" + path.string() + "': " + e.what());
  }
  return thetas;
}

json guarantee_json(const RunConfig& config, const SoftmaxPolicy& policy, int horizon, double slater_margin) {
  const SmoothnessConstants consts = smoothness_constants(policy.score_bounds(), horizon);
  const GuaranteeConstants tc =
      guarantee_constants(consts, policy.score_bounds(), horizon, config.eta, *config.mfcq, slater_margin);
  json doc{{"c", tc.c}, {"C", tc.C}, {"margin_target", tc.margin_target}};
  doc["eta_bound"] = tc.eta_bound ? json(*tc.eta_bound) : json(nullptr);
  doc["eta_within_bound"] = tc.eta_bound ? json(config.eta <= *tc.eta_bound) : json(nullptr);
  return doc;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int RunConfig::batch_size() const { return n ? *n : batch_size_helper(eta, beta, n_rule.k, n_rule.cap); }

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  try {
    reject_unknown(doc,
                   {"env", "policy", "init", "eta", "delta", "beta", "n", "n_rule", "iterations", "seed",
                    "oracle_audit", "output_dir", "theta_out", "workers", "wall_clock", "mfcq"},
                   "run config");
    if (doc.contains("env")) {
      const json& env = doc.at("env");
      if (env.is_string()) {
        c.env.name = env.get<std::string>();
      } else {
        reject_unknown(env, {"name", "params", "path"}, "env");
        c.env.name = env.at("name").get<std::string>();
        if (env.contains("params")) c.env.grid = gridworld_spec_from_json(env.at("params"));
        c.env.file = env.value("path", std::string());
      }
    }
    if (c.env.name != "example1" && c.env.name != "gridworld" && c.env.name != "file") {
      fail(ErrorCode::Parse, "unknown environment '" + c.env.name + "'");
    }
    if (c.env.name == "file" && c.env.file.empty()) fail(ErrorCode::Parse, "file environment needs a path");
    c.policy = doc.value("policy", c.policy);
    if (c.policy != "tabular_softmax" && c.policy != "state_softmax") {
      fail(ErrorCode::Parse, "unknown policy kind '" + c.policy + "'");
    }
    if (doc.contains("init")) {
      const json& init = doc.at("init");
      reject_unknown(init, {"kind", "logit"}, "init");
      c.init.kind = init.value("kind", c.init.kind);
      c.init.logit = init.value("logit", c.init.logit);
      if (c.init.kind != "uniform" && c.init.kind != "slater") {
        fail(ErrorCode::Parse, "unknown init kind '" + c.init.kind + "'");
      }
    }
    c.eta = doc.value("eta", c.eta);
    c.delta = doc.value("delta", c.delta);
    c.beta = doc.value("beta", c.beta);
    if (doc.contains("n") && !doc.at("n").is_null()) c.n = doc.at("n").get<int>();
    if (doc.contains("n_rule")) {
      const json& rule = doc.at("n_rule");
      reject_unknown(rule, {"k", "cap"}, "n_rule");
      c.n_rule.k = rule.value("k", c.n_rule.k);
      c.n_rule.cap = rule.value("cap", c.n_rule.cap);
    }
    c.iterations = doc.value("iterations", c.iterations);
    c.seed = doc.value("seed", c.seed);
    c.oracle_audit = doc.value("oracle_audit", c.oracle_audit);
    c.output_dir = doc.value("output_dir", c.output_dir);
    c.theta_out = theta_out_from_string(doc.value("theta_out", std::string("break")));
    c.workers = doc.value("workers", c.workers);
    c.wall_clock = doc.value("wall_clock", c.wall_clock);
    if (doc.contains("mfcq") && !doc.at("mfcq").is_null()) {
      const json& m = doc.at("mfcq");
      reject_unknown(m, {"p", "ell", "mu_f"}, "mfcq");
      MfcqParams p;
      p.p = m.at("p").get<double>();
      p.ell = m.at("ell").get<double>();
      if (m.contains("mu_f") && !m.at("mu_f").is_null()) p.mu_f = m.at("mu_f").get<double>();
      c.mfcq = p;
    }
    if (c.workers < 0) fail(ErrorCode::Parse, "workers must be non-negative");
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("run config: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::Parse, e.what());
  }
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json env{{"name", c.env.name}};
  if (c.env.name == "gridworld") env["params"] = gridworld_spec_to_json(c.env.grid);
  if (c.env.name == "file") env["path"] = c.env.file;
  json doc{{"env", env},
           {"policy", c.policy},
           {"init", {{"kind", c.init.kind}, {"logit", c.init.logit}}},
           {"eta", c.eta},
           {"delta", c.delta},
           {"beta", c.beta},
           {"n_rule", {{"k", c.n_rule.k}, {"cap", c.n_rule.cap}}},
           {"iterations", c.iterations},
           {"seed", c.seed},
           {"oracle_audit", c.oracle_audit},
           {"output_dir", c.output_dir},
           {"theta_out", to_string(c.theta_out)},
           {"workers", c.workers},
           {"wall_clock", c.wall_clock}};
  doc["n"] = c.n ? json(*c.n) : json(nullptr);
  if (c.mfcq) {
    doc["mfcq"] = {{"p", c.mfcq->p}, {"ell", c.mfcq->ell}};
    doc["mfcq"]["mu_f"] = c.mfcq->mu_f ? json(*c.mfcq->mu_f) : json(nullptr);
  }
  return doc;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig c = run_config_from_json(read_json_file(path));
  if (c.env.name == "file" && fs::path(c.env.file).is_relative()) {
    c.env.file = (fs::path(path).parent_path() / c.env.file).string();
  }
  return c;
}

EnvInstance make_env(const EnvConfig& env) {
  if (env.name == "example1") return example1();
  if (env.name == "gridworld") return gridworld(env.grid);
  if (env.name == "file") {
    MdpDocument doc = load_mdp_file(env.file);
    return {std::move(doc.mdp), std::move(doc.spec)};
  }
  fail(ErrorCode::InvalidArgument, "unknown environment '" + env.name + "'");
}

SoftmaxPolicy make_policy(const RunConfig& config, const AugmentedMdp& aug) {
  const int H = aug.mdp.horizon();
  const int N = aug.mdp.num_states();
  const int A = aug.mdp.num_actions();
  SoftmaxPolicy policy = [&] {
    if (config.policy == "state_softmax") {
      std::vector<int> groups(N);
      for (int id = 0; id < N; ++id) groups[id] = id / kAuxCount;
      return SoftmaxPolicy::tied(H, std::move(groups), A);
    }
    return SoftmaxPolicy::tabular(H, N, A);
  }();
  if (config.init.kind == "slater") policy.set_params(slater_logits(policy, aug, config.init.logit));
  return policy;
}

AuditReport audit_iterates(const AugmentedMdp& aug, const SoftmaxPolicy& shape,
                           const std::vector<std::vector<double>>& thetas, double delta) {
  AuditReport report;
  SoftmaxPolicy policy = shape;
  report.min_margin = INFINITY;
  for (const auto& theta : thetas) {
    policy.set_params(theta);
    const double vc = exact_initial_values(aug, policy.table()).constraint;
    report.vc_exact.push_back(vc);
    ++report.iterates;
    if (vc >= delta) ++report.safe;
    report.min_margin = std::min(report.min_margin, vc - delta);
  }
  report.safe_fraction = report.iterates ? static_cast<double>(report.safe) / report.iterates : 1.0;
  if (report.iterates == 0) report.min_margin = 0.0;
  return report;
}

RunOutcome run_experiment(const RunConfig& config) {
  const EnvInstance inst = make_env(config.env);
  if (const auto issues = validate_mdp(inst.mdp, inst.spec); !issues.empty()) {
    fail(ErrorCode::InvalidArgument, "invalid environment: " + issues.front().message);
  }
  const AugmentedEnv env(inst.mdp, inst.spec);
  const AugmentedMdp aug = build_augmented_finite(env);

  BarrierConfig barrier;
  barrier.eta = config.eta;
  barrier.delta = config.delta;
  barrier.beta = config.beta;
  barrier.n = config.batch_size();
  barrier.iterations = config.iterations;
  barrier.mfcq = config.mfcq;
  barrier.validate();

  const fs::path out_dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory '" + out_dir.string() + "': " + ec.message());

  json resolved = run_config_to_json(config);
  resolved["n"] = barrier.n;
  write_text(out_dir / "config.json", resolved.dump(2) + "\n");

  RunOutcome outcome;
  json& summary = outcome.summary;
  const SlaterReport slater = slater_check(aug, config.delta);
  summary["max_constraint_value"] = slater.max_value;
  summary["slater_margin"] = *slater.margin;
  summary["n"] = barrier.n;
  if (!slater.satisfied) {
    summary["exit_reason"] = "slater_violated";
    summary["exit_code"] = 2;
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    outcome.exit_code = 2;
    return outcome;
  }
  barrier.slater_margin = *slater.margin;

  const SoftmaxPolicy initial = make_policy(config, aug);
  RunOptions options;
  options.sampling.master_seed = config.seed;
  options.sampling.workers = config.workers;
  options.theta_out = config.theta_out;
  options.wall_clock = config.wall_clock;
  if (config.oracle_audit) options.audit = [&aug](const SoftmaxPolicy& p) { return exact_pair(aug, p); };

  const RunResult result = lbsgd_run(env, initial, barrier, options);

  std::string csv = std::string(kCsvHeader) + "\n";
  std::string thetas;
  std::vector<std::vector<double>> logged;
  int steps = 0;
  for (const IterateRecord& r : result.records) {
    csv += csv_row(r) + "\n";
    thetas += json{{"iter", r.iteration}, {"theta", r.theta}}.dump() + "\n";
    logged.push_back(r.theta);
    steps += r.stepped ? 1 : 0;
  }
  write_text(out_dir / "iterates.csv", csv);
  write_text(out_dir / "thetas.jsonl", thetas);

  const SoftmaxPolicy out_policy = initial.with_params(result.theta_out);
  json theta_doc = out_policy.to_json();
  theta_doc["selection"] = to_string(config.theta_out);
  write_text(out_dir / "theta.json", theta_doc.dump(2) + "\n");

  const AuditReport audit = audit_iterates(aug, initial, logged, config.delta);
  const SmoothnessConstants consts = smoothness_constants(initial.score_bounds(), env.horizon());
  const ConcentrationWidths widths = concentration_widths(barrier.n, barrier.beta, consts);
  const bool infeasible_start = result.exit_reason == ExitReason::Infeasible && steps == 0;
  outcome.exit_code = infeasible_start ? 2 : 0;

  summary["exit_reason"] = to_string(result.exit_reason);
  summary["exit_code"] = outcome.exit_code;
  summary["iterations_run"] = result.records.size();
  summary["steps_taken"] = steps;
  summary["break_iteration"] = result.break_iteration ? json(*result.break_iteration) : json(nullptr);
  summary["theta_out_selection"] = to_string(config.theta_out);
  summary["initial"] = values_json(exact_pair(aug, initial));
  summary["final"] = values_json(exact_pair(aug, out_policy));
  summary["safe_fraction"] = audit.safe_fraction;
  summary["safe_iterates"] = audit.safe;
  summary["audited_iterates"] = audit.iterates;
  summary["min_margin"] = audit.min_margin;
  summary["constants"] = {{"L_r", consts.lipschitz_reward},
                          {"L_c", consts.lipschitz_constraint},
                          {"M_r", consts.smooth_reward},
                          {"M_c", consts.smooth_constraint},
                          {"sigma_c0", widths.value_constraint},
                          {"sigma_r1", widths.gradient_reward},
                          {"sigma_c1", widths.gradient_constraint},
                          {"min_n", widths.min_batch}};
  summary["optimum"] = solve_cmdp(aug, config.delta).value;
  if (config.mfcq) summary["guarantee"] = guarantee_json(config, initial, env.horizon(), *slater.margin);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return outcome;
}

json audit_run_dir(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const RunConfig config = run_config_from_json(read_json_file((dir / "config.json").string()));
  const EnvInstance inst = make_env(config.env);
  const AugmentedMdp aug = build_augmented_finite(inst.mdp, inst.spec);
  const SoftmaxPolicy shape = make_policy(config, aug);
  const AuditReport audit = audit_iterates(aug, shape, read_thetas(dir / "thetas.jsonl"), config.delta);

  json report{{"delta", config.delta},
              {"iterates", audit.iterates},
              {"safe_iterates", audit.safe},
              {"safe_fraction", audit.safe_fraction},
              {"min_margin", audit.min_margin}};
  if (fs::exists(dir / "theta.json")) {
    const SoftmaxPolicy out = SoftmaxPolicy::from_json(read_json_file((dir / "theta.json").string()));
    report["theta_out"] = values_json(exact_pair(aug, out));
  }
  if (config.mfcq) {
    const SmoothnessConstants consts = smoothness_constants(shape.score_bounds(), aug.mdp.horizon());
    const double c = config.mfcq->ell / (24.0 * consts.lipschitz_constraint);
    report["margin_target"] = c * config.eta;
    report["margin_target_met"] = audit.min_margin >= c * config.eta;
  }
  return report;
}

json solve_report(const RunConfig& config) {
  const EnvInstance inst = make_env(config.env);
  const AugmentedMdp aug = build_augmented_finite(inst.mdp, inst.spec);
  const SlaterReport slater = slater_check(aug, config.delta);
  const CmdpSolution sol = solve_cmdp(aug, config.delta);
  json doc{{"delta", config.delta},
           {"value", sol.value},
           {"constraint", sol.constraint},
           {"lambda", sol.lambda},
           {"max_constraint_value", slater.max_value},
           {"slater_margin", *slater.margin}};
  json mixture = json::array();
  for (std::size_t k = 0; k < sol.policies.size(); ++k) {
    const DeterministicPolicy& p = sol.policies[k];
    const OccupancyMeasure d = exact_occupancy(aug.mdp, p.to_markov(aug.mdp.num_actions()));
    json rules = json::array();
    for (int t = 0; t < p.horizon; ++t) {
      for (int id = 0; id < p.num_states; ++id) {
        if (d.state_mass(t, id) == 0.0) continue;
        const AugState st = AugState::from_id(id);
        rules.push_back({{"t", t}, {"s", st.s}, {"y", static_cast<int>(st.y)}, {"action", p.at(t, id)}});
      }
    }
    mixture.push_back({{"weight", sol.weights[k]},
                       {"vr", sol.component_values[k].reward},
                       {"vc", sol.component_values[k].constraint},
                       {"reachable_rules", rules}});
  }
  doc["mixture"] = mixture;
  return doc;
}

}  // namespace ra
