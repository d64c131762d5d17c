#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include "interfere/error.hpp"
#include "interfere/estimate.hpp"
#include "interfere/io.hpp"
#include "interfere/oracle.hpp"
#include "interfere/partition.hpp"
#include "interfere/rng.hpp"
#include "interfere/sim.hpp"

#include "cli_harness.hpp"

using namespace interfere;

namespace {

constexpr std::uint64_t kSeed = 20160601;

struct Outcome {
  bool passed = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

PotentialTable random_table(const Clustering& c, std::uint64_t seed, TableKind kind) {
  return make_table({kind, 1.0, 1.0, 0.5, 1.0}, c, seed);
}

EnumerationSpec hierarchical(const SmallDesign& d, PotentialTable t, Statistic s) {
  EnumerationSpec spec;
  spec.clustering = d.clustering;
  spec.counts = d.counts;
  spec.table = std::move(t);
  spec.statistic = s;
  return spec;
}

SimConfig load_config(const std::string& name) {
  return io::sim_config_from_json(io::Json::parse(io::read_file(cli_harness::fixture(name))));
}

Outcome unbiasedness() {
  const Stopwatch clock;
  const SmallDesign d = small_design_8();
  const PotentialTable t = random_table(d.clustering, substream(kSeed, Stream::table, 1), TableKind::heterogeneous);
  const double tau = total_treatment_effect(t);
  const double cr = enumerate_moments(hierarchical(d, t, Statistic::tau_cr)).mean;
  const double cbr = enumerate_moments(hierarchical(d, t, Statistic::tau_cbr)).mean;
  const double delta = enumerate_moments(hierarchical(d, t, Statistic::estimate)).mean;
  const double secs = clock.seconds();
  const bool ok = std::abs(cr - tau) <= 1e-12 && std::abs(cbr - tau) <= 1e-12 && std::abs(delta) <= 1e-12 && secs < 1.0;
  return {ok, "tau " + num(tau) + ", E tau_cr - tau " + num(cr - tau) + ", E tau_cbr - tau " + num(cbr - tau) +
                  ", E Delta " + num(delta) + ", " + num(secs) + " s"};
}

Outcome linear_closed_forms() {
  const Stopwatch clock;
  const SmallDesign d = small_design_8();
  const double beta = 1.0, gamma = 0.5;
  const double n = static_cast<double>(d.clustering.num_units());
  const double m = static_cast<double>(d.clustering.num_clusters());
  const double rho = clustering_metrics(d.graph, d.clustering).rho_c;
  EnumerationSpec s;
  s.clustering = d.clustering;
  s.model = LinearInterferenceModel{0.0, beta, gamma, 0.0};
  s.graph = d.graph;
  s.design = DesignKind::complete;
  s.n_treated = d.clustering.num_units() / 2;
  const double cr = enumerate_moments(s).mean;
  s.design = DesignKind::cluster;
  s.n_treated = d.clustering.num_clusters() / 2;
  const double cbr = enumerate_moments(s).mean;
  const double cr_form = beta - gamma / (n - 1.0);
  const double cbr_form = beta + gamma * (rho * m - 1.0) / (m - 1.0);
  const double secs = clock.seconds();
  const bool ok = std::abs(cr - cr_form) <= 1e-12 && std::abs(cbr - cbr_form) <= 1e-12 && secs < 1.0;
  return {ok, "complete " + num(cr) + " vs " + num(cr_form) + ", cluster " + num(cbr) + " vs " + num(cbr_form) +
                  ", rho_C " + num(rho) + ", " + num(secs) + " s"};
}

Outcome fisher_exactness() {
  double worst = 0.0;
  for (const SmallDesign& d : {small_design_8(), small_design_16()}) {
    for (std::uint64_t k = 0; k < 5; ++k) {
      PotentialTable t = random_table(d.clustering, substream(kSeed, Stream::table, 10 + k), TableKind::constant_effect);
      t.y1 = t.y0;
      const double enumerated = enumerate_moments(hierarchical(d, t, Statistic::estimate)).variance;
      const double closed = fisher_null_variance(t.y0, d.clustering, d.counts);
      worst = std::max(worst, std::abs(enumerated - closed));
    }
  }
  return {worst <= 1e-10, "max |enumerated - closed form| " + num(worst) + " over 10 tables on both small designs"};
}

Outcome bound_dominates() {
  const SmallDesign d = small_design_16();
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 0; k < 100; ++k) {
    const PotentialTable t =
        random_table(d.clustering, substream(kSeed, Stream::table, 100 + k), TableKind::heterogeneous);
    const double var = enumerate_moments(hierarchical(d, t, Statistic::estimate)).variance;
    const double bound = enumerate_moments(hierarchical(d, t, Statistic::variance_bound)).mean;
    worst = std::min(worst, bound - var);
    violations += bound < var - 1e-10;
  }
  const PotentialTable c = random_table(d.clustering, substream(kSeed, Stream::table, 99), TableKind::constant_effect);
  const double var = enumerate_moments(hierarchical(d, c, Statistic::estimate)).variance;
  const double bound = enumerate_moments(hierarchical(d, c, Statistic::variance_bound)).mean;
  const bool equality = std::abs(bound - var) <= 1e-10;
  return {violations == 0 && equality, "violations " + std::to_string(violations) +
                                           "/100, min E(bound) - var " + num(worst) +
                                           ", constant-effect gap " + num(bound - var)};
}

Outcome bernoulli_gap() {
  const Stopwatch clock;
  const Clustering c = Clustering::contiguous_blocks(12, 1);
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 0; k < 100; ++k) {
    const PotentialTable t = random_table(c, substream(kSeed, Stream::table, 1000 + k), TableKind::heterogeneous);
    const BernoulliGap g = bernoulli_vs_cr_variance_gap(t, 6);
    violations += !g.within_bound;
    worst = std::min(worst, g.bound - std::abs(g.gap));
  }
  const double e = binomial_negative_moment(12, 0.5);
  const double secs = clock.seconds();
  const bool ok = violations == 0 && std::abs(e - 1.0 / 6.0) <= 5.0 / 36.0 && secs < 10.0;
  return {ok, "violations " + std::to_string(violations) + "/100, min slack " + num(worst) + ", E(1/eta_t) " +
                  num(e) + ", " + num(secs) + " s"};
}

Outcome ratio_desk() {
  const SimReport r = run_ratio_study(load_config("fig1a_desk.json"));
  const SimRow& row = r.rows.at(0);
  const bool ok = row.ratio_mean >= 0.97 && row.ratio_mean <= 1.03 && row.ratio_q10 <= 1.0 && row.ratio_q90 >= 1.0;
  return {ok, "M " + std::to_string(row.num_clusters) + ", R " + std::to_string(row.replications) + ", mean ratio " +
                  num(row.ratio_mean) + " (se " + num(row.ratio_se) + "), q10 " + num(row.ratio_q10) + ", q90 " +
                  num(row.ratio_q90) + ", in (0.95, 1.05) " + num(row.ratio_in_band)};
}

const SimRow* find_row(const SimReport& r, const std::string& setting, double gamma) {
  for (const SimRow& row : r.rows)
    if (row.setting == setting && std::abs(row.gamma - gamma) < 1e-12) return &row;
  return nullptr;
}

Outcome power_desk() {
  const SimConfig cfg = load_config("fig1b_desk.json");
  const SimReport r = run_power_study(cfg);
  const double alpha_se = std::sqrt(cfg.alpha * (1.0 - cfg.alpha) / static_cast<double>(cfg.replications));
  bool type1 = true, monotone = true;
  std::string top_setting;
  double top_rho = -1.0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const SimRow& row = r.rows[i];
    if (row.gamma == 0.0) type1 = type1 && row.rejection_rate <= cfg.alpha + 3.0 * alpha_se;
    if (i > 0 && r.rows[i - 1].setting == row.setting) {
      const SimRow& prev = r.rows[i - 1];
      monotone = monotone &&
                 row.rejection_rate >= prev.rejection_rate - 2.0 * std::hypot(row.rejection_se, prev.rejection_se);
    }
    if (row.rho_c > top_rho) {
      top_rho = row.rho_c;
      top_setting = row.setting;
    }
  }
  const SimRow* at_one = find_row(r, top_setting, 1.0);
  const double power = at_one ? at_one->rejection_rate : 0.0;
  const bool ok = type1 && monotone && power >= 0.9;
  return {ok, std::string("(a) type I ") + (type1 ? "ok" : "exceeded") + ", (b) monotone " +
                  (monotone ? "ok" : "violated") + ", (c) power at rho_C " + num(top_rho) + ", gamma 1: " +
                  num(power) + " (se " + num(at_one ? at_one->rejection_se : 0.0) + ", needs >= 0.9)"};
}

SimConfig top_setting_config(double target_rho) {
  SimConfig cfg = load_config("fig1b_desk.json");
  cfg.settings = {SbmSetting{target_rho, {}, {}}};
  return cfg;
}

Outcome delta_expectation() {
  const SimReport r = run_power_study(top_setting_config(0.4));
  bool ok = true;
  std::string detail;
  for (const SimRow& row : r.rows) {
    if (row.gamma <= 0.0) continue;
    const double target = row.gamma * row.rho_c;
    const double z = (row.mean_delta - target) / row.delta_se;
    ok = ok && std::abs(z) <= 3.0;
    detail += "gamma " + num(row.gamma) + ": mean " + num(row.mean_delta) + " vs " + num(target) + " (z " + num(z) +
              "; vs -gamma rho_C z " + num((row.mean_delta + target) / row.delta_se) + "; exact E " +
              num(row.expected_delta) + "); ";
  }
  return {ok, "rho_C " + num(r.rows.at(0).rho_c) + "; " + detail};
}

Outcome table1_p_value() {
  const double p = gaussian_p_value(-3.3, 8.1);
  return {std::abs(p - 0.684) <= 0.01, "p " + num(p)};
}

Outcome appendix_variance() {
  SimConfig cfg = top_setting_config(0.4);
  cfg.gamma_grid = {0.5};
  cfg.replications = 10000;
  const SimReport r = run_power_study(cfg);
  const SimRow& row = r.rows.at(0);
  const double approx = row.approx_variance.value_or(std::nan(""));
  const double rel = std::abs(approx - row.var_delta) / row.var_delta;
  return {rel <= 0.25, "rho_C " + num(row.rho_c) + ", formula " + num(approx) + ", Monte Carlo var " +
                           num(row.var_delta) + ", relative error " + num(rel)};
}

Outcome cli_determinism() {
  using namespace cli_harness;
  const fs::path dir = fresh_dir("acceptance_determinism");
  for (const Step& s : pipeline()) {
    const int code = run(dir, s.args, s.stdout_file);
    if (code != s.expected_exit) return {false, s.name + " exited " + std::to_string(code)};
  }
  const auto first = snapshot(dir);
  for (const Step& s : pipeline()) {
    const int code = run(dir, s.args, s.stdout_file);
    if (code != s.expected_exit) return {false, s.name + " rerun exited " + std::to_string(code)};
  }
  const auto second = snapshot(dir);
  std::size_t differing = 0;
  std::string names;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != bytes) {
      ++differing;
      names += " " + name;
    }
  }
  const bool ok = differing == 0 && first.size() == second.size();
  return {ok, std::to_string(pipeline().size()) + " invocations, " + std::to_string(first.size()) + " artifacts, " +
                  std::to_string(differing) + " differing" + names};
}

const std::function<Outcome()> kCriteria[] = {
    unbiasedness,  linear_closed_forms, fisher_exactness, bound_dominates, bernoulli_gap,   ratio_desk,
    power_desk,    delta_expectation,   table1_p_value,   appendix_variance, cli_determinism,
};
constexpr int kCount = static_cast<int>(std::size(kCriteria));

bool report(int n) {
  Outcome o;
  try {
    o = kCriteria[n - 1]();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  std::cout << "criterion " << n << ": " << (o.passed ? "PASS" : "FAIL") << " | " << o.detail << std::endl;
  return o.passed;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::string(argv[1]) == "--criterion") {
    const int n = std::atoi(argv[2]);
    if (n < 1 || n > kCount) {
      std::cerr << "criterion must lie in 1.." << kCount << "\n";
      return 1;
    }
    return report(n) ? 0 : 2;
  }
  if (argc != 1) {
    std::cerr << "usage: acceptance [--criterion N]\n";
    return 1;
  }
  bool all = true;
  for (int n = 1; n <= kCount; ++n) all = report(n) && all;
  return all ? 0 : 2;
}
