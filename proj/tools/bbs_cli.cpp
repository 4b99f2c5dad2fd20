// Command-line front end: exact TBA/GHD analytics, transfer-matrix
// quantities, large-deviation functions, and the Monte Carlo measurement
// harness, with CSV/JSON emission suitable for plotting.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bbs/config.hpp"
#include "bbs/ensembles.hpp"
#include "bbs/evolve.hpp"
#include "bbs/ldf.hpp"
#include "bbs/measure.hpp"
#include "bbs/tba.hpp"
#include "bbs/tba_matrices.hpp"
#include "bbs/transfer_matrix.hpp"

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Row-oriented output with a manifest line recording the full invocation.
class Output {
 public:
  explicit Output(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::initializer_list<json> cells) {
    rows_.emplace_back(cells.begin(), cells.end());
  }

  void write(const std::string& path, const std::string& format,
             const std::string& manifest) const {
    std::ostringstream body;
    if (format == "csv") {
      body << "# " << manifest << "\n";
      for (std::size_t i = 0; i < header_.size(); ++i)
        body << header_[i] << (i + 1 < header_.size() ? "," : "\n");
      for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) {
          body << cell_text(row[i]) << (i + 1 < row.size() ? "," : "\n");
        }
      }
    } else {
      json doc;
      doc["_manifest"] = manifest;
      doc["rows"] = json::array();
      for (const auto& row : rows_) {
        json obj;
        for (std::size_t i = 0; i < row.size() && i < header_.size(); ++i)
          obj[header_[i]] = row[i];
        doc["rows"].push_back(std::move(obj));
      }
      body << doc.dump(2) << "\n";
    }
    if (path.empty() || path == "-") {
      std::cout << body.str();
    } else {
      std::ofstream os(path, std::ios::binary);
      if (!os) throw bbs::DomainError("cannot open output file: " + path);
      os << body.str();
    }
  }

 private:
  static std::string cell_text(const json& v) {
    if (v.is_number_float()) return fmt17(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  std::vector<std::string> header_;
  std::vector<std::vector<json>> rows_;
};

struct CommonOpts {
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--out", c.out, "output file (default: stdout)");
  cmd->add_option("--format", c.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
}

int default_workers() {
  if (const char* env = std::getenv("BBS_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

// capacity option accepting a positive integer or "inf"
int parse_capacity(const std::string& text) {
  if (text == "inf" || text == "INF" || text == "Inf") return bbs::tba::kInf;
  const long v = std::strtol(text.c_str(), nullptr, 10);
  if (v < 1) throw bbs::DomainError("capacity must be a positive integer or 'inf'");
  if (v > 1000000) throw bbs::DomainError("capacity out of range");
  return static_cast<int>(v);
}

struct StateParams {
  double a = 0.0, z = 0.0;
  bool two_temperature = false;
};

// Shared flags selecting the stationary state: --density/--fugacity for the
// i.i.d. case, --a/--z or --beta1/--beta-inf for the two-temperature GGE.
struct StateOpts {
  std::optional<double> density, fugacity, a, z, beta1, beta_inf;

  void attach(CLI::App* cmd) {
    cmd->add_option("--density", density, "i.i.d. ball density p in [0, 1/2)");
    cmd->add_option("--fugacity", fugacity, "i.i.d. ball fugacity z = p/(1-p)");
    cmd->add_option("--a", a, "two-temperature parameter a in (0,1)");
    cmd->add_option("--z", z, "two-temperature parameter z in (0,1)");
    cmd->add_option("--beta1", beta1, "inverse temperature coupled to the soliton count");
    cmd->add_option("--beta-inf", beta_inf, "inverse temperature coupled to the ball count");
  }

  StateParams resolve() const {
    StateParams sp;
    if (a && z) {
      sp.a = *a;
      sp.z = *z;
      sp.two_temperature = true;
    } else if (beta1 && beta_inf) {
      bbs::Gge2tSpec g;
      g.length = 1;
      g.beta1 = *beta1;
      g.beta_inf = *beta_inf;
      sp.z = g.fugacity_z();
      sp.a = g.parameter_a();
      sp.two_temperature = true;
    } else if (fugacity) {
      sp.z = sp.a = *fugacity;
    } else if (density) {
      sp.z = sp.a = bbs::tba::fugacity_from_density(*density);
    } else {
      throw bbs::DomainError(
          "state required: --density/--fugacity (i.i.d.) or --a --z / --beta1 --beta-inf");
    }
    bbs::tba::validate_az(sp.a, sp.z);
    return sp;
  }

  std::string describe() const {
    std::ostringstream os;
    if (density) os << " density=" << *density;
    if (fugacity) os << " fugacity=" << *fugacity;
    if (a) os << " a=" << *a;
    if (z) os << " z=" << *z;
    if (beta1) os << " beta1=" << *beta1;
    if (beta_inf) os << " beta_inf=" << *beta_inf;
    return os.str();
  }
};

// Ensemble flags for the measure-* subcommands. A key-value spec file
// (keys: ensemble, length, density | beta1, beta_inf, burn_in, thinning,
// seed) can stand in for the flags.
struct EnsembleOpts {
  std::size_t length = 0;
  std::optional<double> density, a, z, beta1, beta_inf;
  int burn_in = 20, thinning = 5;
  std::string file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--length", length, "lattice length L");
    cmd->add_option("--density", density, "i.i.d. ball density");
    cmd->add_option("--a", a, "two-temperature parameter a");
    cmd->add_option("--z", z, "two-temperature parameter z");
    cmd->add_option("--beta1", beta1, "GGE inverse temperature for solitons");
    cmd->add_option("--beta-inf", beta_inf, "GGE inverse temperature for balls");
    cmd->add_option("--burn-in", burn_in, "MCMC burn-in sweeps");
    cmd->add_option("--thinning", thinning, "MCMC thinning sweeps");
    cmd->add_option("--ensemble-file", file, "key-value ensemble spec file");
  }

  bbs::mc::Ensemble resolve() const {
    if (!file.empty()) return from_file();
    if (length < 1) throw bbs::DomainError("ensemble: --length is required");
    if (density) return bbs::mc::Ensemble::make_iid(length, *density);
    bbs::Gge2tSpec g;
    if (a && z) {
      g = bbs::Gge2tSpec::from_az(*a, *z, length, 1);
    } else if (beta1 && beta_inf) {
      g.length = length;
      g.beta1 = *beta1;
      g.beta_inf = *beta_inf;
    } else {
      throw bbs::DomainError(
          "ensemble required: --density (i.i.d.) or --a --z / --beta1 --beta-inf (GGE)");
    }
    g.burn_in = burn_in;
    g.thinning = thinning;
    return bbs::mc::Ensemble::make_gge2t(g);
  }

  bbs::mc::Ensemble from_file() const {
    std::ifstream is(file);
    if (!is) throw bbs::DomainError("cannot open ensemble file: " + file);
    std::stringstream buf;
    buf << is.rdbuf();
    const auto kv = bbs::parse_key_value(buf.str());
    const auto need = [&](const std::string& key) {
      const auto it = kv.find(key);
      if (it == kv.end()) throw bbs::DomainError("ensemble file: missing key " + key);
      return it->second;
    };
    if (need("ensemble") == "iid")
      return bbs::mc::Ensemble::make_iid(std::stoul(need("length")),
                                         std::stod(need("density")));
    if (need("ensemble") == "gge2t") {
      bbs::Gge2tSpec g;
      g.length = std::stoul(need("length"));
      g.beta1 = std::stod(need("beta1"));
      g.beta_inf = std::stod(need("beta_inf"));
      if (kv.count("burn_in")) g.burn_in = std::stoi(kv.at("burn_in"));
      if (kv.count("thinning")) g.thinning = std::stoi(kv.at("thinning"));
      return bbs::mc::Ensemble::make_gge2t(g);
    }
    throw bbs::DomainError("ensemble file: ensemble must be iid or gge2t");
  }

  std::string describe() const {
    std::ostringstream os;
    if (!file.empty()) {
      os << "ensemble-file=" << file;
      return os.str();
    }
    os << "length=" << length;
    if (density) os << " density=" << *density;
    if (a) os << " a=" << *a;
    if (z) os << " z=" << *z;
    if (beta1) os << " beta1=" << *beta1;
    if (beta_inf) os << " beta_inf=" << *beta_inf;
    return os.str();
  }
};

bbs::Configuration load_state(const std::string& state, const std::string& file) {
  if (!state.empty()) return bbs::Configuration::from_string(state);
  if (file.empty()) throw bbs::DomainError("provide --state or --state-file");
  std::ifstream is(file, std::ios::binary);
  if (!is) throw bbs::DomainError("cannot open state file: " + file);
  const int first = is.peek();
  if (first == '0' || first == '1') {
    std::string line;
    std::getline(is, line);
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return bbs::Configuration::from_string(line);
  }
  return bbs::Configuration::read_binary(is);
}

struct Grid {
  double lo = 0.0, hi = 0.0, step = 0.0;
};

Grid parse_grid(const std::string& text) {
  Grid g;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &g.lo, &g.hi, &g.step) != 3 || g.step <= 0)
    throw bbs::DomainError("grid format is lo:hi:step with step > 0");
  return g;
}

std::string manifest_line(const std::string& name, const std::string& params) {
  return "bbs " + name + params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "box-ball system: carrier dynamics, exact TBA/GHD analytics, large deviations, "
      "and Monte Carlo measurements"};
  app.require_subcommand(1);

  // ------------------------------------------------------------------ evolve
  auto* evolve = app.add_subcommand(
      "evolve", "apply T_l sweeps to a configuration and print the carrier trace "
                "(the per-bond ball current)");
  std::string ev_state, ev_state_file;
  int ev_capacity = 1;
  long ev_steps = 1;
  std::optional<int> ev_u0;
  CommonOpts ev_common;
  evolve->add_option("--state", ev_state, "configuration as a line of 0/1");
  evolve->add_option("--state-file", ev_state_file, "text or binary configuration file");
  evolve->add_option("--capacity", ev_capacity, "carrier capacity l")->required();
  evolve->add_option("--steps", ev_steps, "number of sweeps");
  evolve->add_option("--u0", ev_u0, "open-boundary initial load (default: periodic sweep)");
  add_common(evolve, ev_common);

  // ---------------------------------------------------------------- energies
  auto* energies = app.add_subcommand(
      "energies", "conserved energies E_k, soliton content and pseudoenergies of a "
                  "configuration");
  std::string en_state, en_state_file;
  int en_max_k = 0;
  CommonOpts en_common;
  energies->add_option("--state", en_state, "configuration as a line of 0/1");
  energies->add_option("--state-file", en_state_file, "text or binary configuration file");
  energies->add_option("--max-k", en_max_k, "largest k (default: saturate at E_k = Q)");
  add_common(energies, en_common);

  // --------------------------------------------------------------------- tba
  auto* tba_cmd = app.add_subcommand(
      "tba", "soliton densities rho_k, hole densities sigma_k and effective "
             "velocities v^{(l)}_k of the stationary state");
  StateOpts tba_state;
  tba_state.attach(tba_cmd);
  std::string tba_cap = "inf";
  int tba_K = 64;
  CommonOpts tba_common;
  tba_cmd->add_option("--capacity", tba_cap, "dynamics capacity l (integer or 'inf')");
  tba_cmd->add_option("--truncation", tba_K, "largest soliton size K kept");
  add_common(tba_cmd, tba_common);

  // ------------------------------------------------------------------- drude
  auto* drude = app.add_subcommand(
      "drude", "ballistic transport coefficients: Drude weight D^{(l)}, D^{(1)} and "
               "the second cumulant c2 of the transferred-ball count");
  StateOpts dr_state;
  dr_state.attach(drude);
  std::string dr_cap = "2";
  CommonOpts dr_common;
  drude->add_option("--capacity", dr_cap, "carrier capacity l (integer or 'inf')");
  add_common(drude, dr_common);

  // ------------------------------------------------------------ correlations
  auto* corr = app.add_subcommand(
      "correlations", "four-index generalized current correlation C^{l,m}_{i,j} "
                      "(long-time limit, TBA value)");
  StateOpts co_state;
  co_state.attach(corr);
  std::string co_i = "inf", co_j = "inf", co_l = "1", co_m = "1";
  CommonOpts co_common;
  corr->add_option("--i", co_i, "charge index i (integer or 'inf')");
  corr->add_option("--j", co_j, "charge index j (integer or 'inf')");
  corr->add_option("--l", co_l, "dynamics index l (integer or 'inf')");
  corr->add_option("--m", co_m, "dynamics index m (integer or 'inf')");
  add_common(corr, co_common);

  // ----------------------------------------------------------- flux-jacobian
  auto* fjac = app.add_subcommand(
      "flux-jacobian", "flux Jacobian A^{(l)} = d(current)/d(density) in the hole-density "
                       "variables; eigenvalues are the effective velocities");
  StateOpts fj_state;
  fj_state.attach(fjac);
  int fj_capacity = 2, fj_K = 12;
  CommonOpts fj_common;
  fjac->add_option("--capacity", fj_capacity, "dynamics capacity l")->required();
  fjac->add_option("--truncation", fj_K, "matrix truncation K >= l");
  add_common(fjac, fj_common);

  // --------------------------------------------------------------------- ldf
  auto* ldf_cmd = app.add_subcommand(
      "ldf", "scaled cumulant generating function F(lambda) and large-deviation rate "
             "function G(j) of the transferred-ball count");
  StateOpts ld_state;
  ld_state.attach(ldf_cmd);
  std::string ld_cap = "inf";
  std::string ld_jgrid, ld_lgrid;
  CommonOpts ld_common;
  ldf_cmd->add_option("--capacity", ld_cap, "carrier capacity l (integer or 'inf')");
  ldf_cmd->add_option("--grid", ld_jgrid, "current grid j=lo:hi:step for (j, G, lambda*)");
  ldf_cmd->add_option("--lambda-grid", ld_lgrid, "lambda grid lo:hi:step for (lambda, F, F')");
  add_common(ldf_cmd, ld_common);

  // ------------------------------------------------------------------- ldf2t
  auto* ldf2t = app.add_subcommand(
      "ldf2t", "joint SCGF F(lambda, mu) of transferred balls and solitons in the "
               "two-temperature GGE, and the l=inf joint rate function");
  StateOpts l2_state;
  l2_state.attach(ldf2t);
  std::string l2_cap = "inf";
  std::vector<double> l2_lambda{0.0}, l2_mu{0.0};
  std::optional<double> l2_jball, l2_jsol;
  CommonOpts l2_common;
  ldf2t->add_option("--capacity", l2_cap, "carrier capacity l (integer or 'inf')");
  ldf2t->add_option("--lambda", l2_lambda, "lambda values (repeatable)");
  ldf2t->add_option("--mu", l2_mu, "mu values (repeatable)");
  ldf2t->add_option("--rate-ball", l2_jball, "ball current for the joint rate function");
  ldf2t->add_option("--rate-soliton", l2_jsol, "soliton current for the joint rate function");
  add_common(ldf2t, l2_common);

  // --------------------------------------------------------- transfer-matrix
  auto* tmat = app.add_subcommand(
      "transfer-matrix", "equal-time integrated current variance f, its conjectured "
                         "closed form, and c2 from the carrier transfer matrix");
  StateOpts tm_state;
  tm_state.attach(tmat);
  int tm_capacity = 2;
  CommonOpts tm_common;
  tmat->add_option("--capacity", tm_capacity, "carrier capacity l")->required();
  add_common(tmat, tm_common);

  // ------------------------------------------------------- measure-* shared
  struct MeasureOpts {
    EnsembleOpts ensemble;
    long time = 1;
    std::uint64_t samples = 1000;
    std::uint64_t seed = 1;
    int workers = default_workers();
    int batches = 100;
    bool allow_wrap = false;
    CommonOpts common;

    void attach(CLI::App* cmd, bool with_time = true) {
      ensemble.attach(cmd);
      if (with_time) cmd->add_option("--time", time, "number of sweeps t");
      cmd->add_option("--samples", samples, "number of Monte Carlo samples");
      cmd->add_option("--seed", seed, "master seed");
      cmd->add_option("--workers", workers, "worker threads (default: BBS_WORKERS or 1)");
      cmd->add_option("--batches", batches, "jackknife batches");
      cmd->add_flag("--allow-wrap", allow_wrap, "skip the no-wrap lattice-size check");
      add_common(cmd, common);
    }

    std::string describe(const std::string& extra) const {
      std::ostringstream os;
      os << " " << ensemble.describe() << extra << " samples=" << samples
         << " seed=" << seed << " batches=" << batches;
      return os.str();
    }
  };

  auto* mcum = app.add_subcommand(
      "measure-cumulants", "Monte Carlo scaled cumulants <N_t^k>_c / t of the "
                           "transferred-ball count under T_l");
  MeasureOpts mc_cum;
  int mc_cum_capacity = 1;
  mcum->add_option("--capacity", mc_cum_capacity, "dynamics capacity l")->required();
  mc_cum.attach(mcum);

  auto* mhist = app.add_subcommand(
      "measure-histogram", "empirical distribution of N_t with the large-deviation "
                           "theory overlay exp(-t G(N/t))");
  MeasureOpts mc_hist;
  int mc_hist_capacity = 1;
  mhist->add_option("--capacity", mc_hist_capacity, "dynamics capacity l")->required();
  mc_hist.attach(mhist);

  auto* mcorr = app.add_subcommand(
      "measure-correlation", "time-averaged generalized current correlation "
                             "C^{m,l,n}_{i,j} from microscopic simulation");
  MeasureOpts mc_corr;
  int mc_corr_capacity = 1, mc_corr_n = 0, mc_corr_m = 1, mc_corr_i = 99, mc_corr_j = 99;
  mcorr->add_option("--capacity", mc_corr_capacity, "observable dynamics label l")->required();
  mcorr->add_option("--m", mc_corr_m, "observable dynamics label m")->required();
  mcorr->add_option("--i", mc_corr_i, "charge index i (99 ~ infinity)");
  mcorr->add_option("--j", mc_corr_j, "charge index j (99 ~ infinity)");
  mcorr->add_option("--dyn-capacity", mc_corr_n, "evolution capacity n (default: l)");
  mc_corr.attach(mcorr);

  auto* mpseudo = app.add_subcommand(
      "measure-pseudoenergy", "pseudoenergy covariance matrix L cov(eps_i, eps_j) "
                              "against the diagonal TBA prediction");
  MeasureOpts mc_pseudo;
  int mc_pseudo_imax = 3;
  mpseudo->add_option("--imax", mc_pseudo_imax, "largest pseudoenergy index");
  mc_pseudo.attach(mpseudo, false);

  auto* msum = app.add_subcommand(
      "sum-rule-check", "Monte Carlo check of the density-current correlation sum rule");
  MeasureOpts mc_sum;
  int mc_sum_capacity = 1;
  std::string mc_sum_weight = "abs";
  msum->add_option("--capacity", mc_sum_capacity, "dynamics capacity l")->required();
  msum->add_option("--weight", mc_sum_weight, "test function f(x): abs or x2")
      ->check(CLI::IsMember({"abs", "x2"}));
  mc_sum.attach(msum);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evolve) {
      auto c = load_state(ev_state, ev_state_file);
      Output out({"step", "state", "entry_load", "exit_load", "trace"});
      std::string manifest = manifest_line(
          "evolve", " capacity=" + std::to_string(ev_capacity) +
                        " steps=" + std::to_string(ev_steps) +
                        (ev_u0 ? " u0=" + std::to_string(*ev_u0) : "") +
                        " state=" + c.to_string());
      for (long s = 1; s <= ev_steps; ++s) {
        const auto r = ev_u0 ? bbs::evolve_open(c, ev_capacity, *ev_u0)
                             : bbs::evolve_periodic(c, ev_capacity);
        std::ostringstream trace;
        for (std::size_t x = 0; x < r.trace.loads.size(); ++x)
          trace << r.trace.loads[x] << (x + 1 < r.trace.loads.size() ? " " : "");
        out.add({s, r.config.to_string(), r.trace.loads.empty() ? 0 : r.trace.loads[0],
                 r.trace.exit, trace.str()});
        c = r.config;
      }
      out.write(ev_common.out, ev_common.format, manifest);
      if (ev_common.out.empty() && ev_common.format == "csv")
        std::cerr << c.to_string() << "\n";
    } else if (*energies) {
      auto c = load_state(en_state, en_state_file);
      const auto sp = en_max_k > 0 ? bbs::spectrum(c, en_max_k) : bbs::saturated_spectrum(c);
      Output out({"k", "E_k", "multiplicity", "pseudoenergy"});
      for (int k = 1; k <= sp.max_index(); ++k) {
        json mk = nullptr, eps = nullptr;
        if (k + 1 <= sp.max_index()) {
          mk = 2 * sp.at(k) - sp.at(k - 1) - sp.at(k + 1);
          try {
            eps = bbs::pseudoenergy(sp, k);
          } catch (const bbs::Error&) {
            eps = nullptr;
          }
        }
        out.add({k, sp.at(k), mk, eps});
      }
      out.write(en_common.out, en_common.format,
                manifest_line("energies", " state=" + c.to_string()));
    } else if (*tba_cmd) {
      const auto sp = tba_state.resolve();
      const int l = parse_capacity(tba_cap);
      auto prof = bbs::tba::profile(sp.a, sp.z, tba_K);
      auto vb = bbs::tba::velocities(prof, bbs::tba::kInf);
      auto vl = bbs::tba::velocities(prof, bbs::tba::is_inf(l) ? bbs::tba::kInf
                                                               : std::min(l, tba_K));
      Output out({"k", "rho", "sigma", "y", "v_bare", "v_l"});
      for (int k = 1; k <= tba_K; ++k)
        out.add({k, prof.rho_at(k), prof.sigma_at(k), prof.y_at(k), vb.at(k), vl.at(k)});
      out.write(tba_common.out, tba_common.format,
                manifest_line("tba", tba_state.describe() + " capacity=" + tba_cap +
                                         " truncation=" + std::to_string(tba_K)));
    } else if (*drude) {
      const auto sp = dr_state.resolve();
      const int l = parse_capacity(dr_cap);
      Output out({"quantity", "params", "value"});
      const std::string params = "a=" + fmt17(sp.a) + ";z=" + fmt17(sp.z) +
                                 ";l=" + dr_cap;
      out.add({"drude_weight", params, bbs::tba::drude_analytic(sp.a, sp.z, l)});
      out.add({"drude_weight_l1", params, bbs::tba::drude1(sp.a, sp.z)});
      out.add({"c2", params, bbs::tba::c2_analytic(sp.a, sp.z, l)});
      out.add({"ball_current", params, bbs::tba::mean_currents(sp.a, sp.z, l).ball});
      out.add({"soliton_current", params, bbs::tba::mean_currents(sp.a, sp.z, l).soliton});
      out.write(dr_common.out, dr_common.format,
                manifest_line("drude", dr_state.describe() + " capacity=" + dr_cap));
    } else if (*corr) {
      const auto sp = co_state.resolve();
      Output out({"quantity", "params", "value"});
      const int i = parse_capacity(co_i), j = parse_capacity(co_j);
      const int l = parse_capacity(co_l), m = parse_capacity(co_m);
      out.add({"C^{l,m}_{i,j}",
               "a=" + fmt17(sp.a) + ";z=" + fmt17(sp.z) + ";i=" + co_i + ";j=" + co_j +
                   ";l=" + co_l + ";m=" + co_m,
               bbs::tba::four_index_correlation(sp.a, sp.z, i, j, l, m)});
      out.write(co_common.out, co_common.format,
                manifest_line("correlations", co_state.describe() + " i=" + co_i +
                                                  " j=" + co_j + " l=" + co_l +
                                                  " m=" + co_m));
    } else if (*fjac) {
      const auto sp = fj_state.resolve();
      if (fj_K < fj_capacity) throw bbs::DomainError("flux-jacobian: truncation must be >= l");
      auto prof = bbs::tba::profile(sp.a, sp.z, fj_K);
      auto A = bbs::tba::flux_jacobian(prof, fj_capacity, fj_K);
      Output out({"i", "j", "value"});
      for (int i = 1; i <= fj_K; ++i)
        for (int j = 1; j <= fj_K; ++j) out.add({i, j, A(i - 1, j - 1)});
      out.write(fj_common.out, fj_common.format,
                manifest_line("flux-jacobian",
                              fj_state.describe() + " capacity=" + std::to_string(fj_capacity) +
                                  " truncation=" + std::to_string(fj_K)));
    } else if (*ldf_cmd) {
      const auto sp = ld_state.resolve();
      if (sp.two_temperature)
        throw bbs::DomainError("ldf: single-temperature only; use ldf2t for the GGE");
      const int l = parse_capacity(ld_cap);
      if (!ld_jgrid.empty()) {
        std::string spec = ld_jgrid;
        if (spec.rfind("j=", 0) == 0) spec = spec.substr(2);
        const Grid g = parse_grid(spec);
        Output out({"j", "G", "lambda"});
        for (double jv = g.lo; jv <= g.hi + 1e-12; jv += g.step) {
          try {
            const auto rp = bbs::ldf::rate(sp.z, l, jv);
            out.add({jv, rp.value, rp.multiplier});
          } catch (const bbs::DomainError&) {
            // outside (0, l): skip the grid point
          }
        }
        out.write(ld_common.out, ld_common.format,
                  manifest_line("ldf", ld_state.describe() + " capacity=" + ld_cap +
                                           " grid=j=" + spec));
      } else {
        std::string spec = ld_lgrid.empty() ? "-1.0:1.0:0.05" : ld_lgrid;
        const Grid g = parse_grid(spec);
        Output out({"lambda", "F", "dF"});
        for (double lv = g.lo; lv <= g.hi + 1e-12; lv += g.step) {
          const auto pt = bbs::ldf::scgf(sp.z, l, lv);
          out.add({lv, pt.value, pt.derivative});
        }
        out.write(ld_common.out, ld_common.format,
                  manifest_line("ldf", ld_state.describe() + " capacity=" + ld_cap +
                                           " lambda-grid=" + spec));
      }
    } else if (*ldf2t) {
      const auto sp = l2_state.resolve();
      const int l = parse_capacity(l2_cap);
      if (l2_jball && l2_jsol) {
        Output out({"quantity", "params", "value"});
        out.add({"rate_2t_inf",
                 "a=" + fmt17(sp.a) + ";z=" + fmt17(sp.z) + ";J_ball=" + fmt17(*l2_jball) +
                     ";J_soliton=" + fmt17(*l2_jsol),
                 bbs::ldf::rate_2t_inf(sp.a, sp.z, *l2_jball, *l2_jsol)});
        out.write(l2_common.out, l2_common.format,
                  manifest_line("ldf2t", l2_state.describe() +
                                             " rate-ball=" + fmt17(*l2_jball) +
                                             " rate-soliton=" + fmt17(*l2_jsol)));
      } else {
        Output out({"lambda", "mu", "F", "dF_dlambda", "dF_dmu"});
        for (double lv : l2_lambda)
          for (double mv : l2_mu) {
            const auto pt = bbs::ldf::scgf_2t(sp.a, sp.z, l, lv, mv);
            out.add({lv, mv, pt.value, pt.d_lambda, pt.d_mu});
          }
        out.write(l2_common.out, l2_common.format,
                  manifest_line("ldf2t", l2_state.describe() + " capacity=" + l2_cap));
      }
    } else if (*tmat) {
      const auto sp = tm_state.resolve();
      if (sp.two_temperature)
        throw bbs::DomainError("transfer-matrix: defined for the i.i.d. state");
      Output out({"l", "z", "f", "conjectured_f", "c2_via_tm"});
      out.add({tm_capacity, sp.z, bbs::tm::equal_time_variance(tm_capacity, sp.z),
               bbs::tm::conjectured_f(tm_capacity, sp.z),
               bbs::tm::c2_via_tm(tm_capacity, sp.z)});
      out.write(tm_common.out, tm_common.format,
                manifest_line("transfer-matrix", tm_state.describe() + " capacity=" +
                                                     std::to_string(tm_capacity)));
    } else if (*mcum) {
      bbs::mc::MeasurementPlan plan;
      plan.ensemble = mc_cum.ensemble.resolve();
      plan.capacity = mc_cum_capacity;
      plan.time = mc_cum.time;
      plan.samples = mc_cum.samples;
      plan.seed = mc_cum.seed;
      plan.workers = mc_cum.workers;
      plan.batches = mc_cum.batches;
      plan.allow_wrap = mc_cum.allow_wrap;
      const auto r = bbs::mc::measure_cumulants(plan);
      Output out({"name", "params", "estimate", "stderr", "n_samples", "n_excluded"});
      const std::string params = mc_cum.ensemble.describe() +
                                 ";capacity=" + std::to_string(mc_cum_capacity) +
                                 ";time=" + std::to_string(mc_cum.time);
      const char* names[4] = {"c1", "c2", "c3", "c4"};
      for (int k = 0; k < 4; ++k)
        out.add({names[k], params, r.value[static_cast<std::size_t>(k)],
                 r.error[static_cast<std::size_t>(k)], r.samples, r.excluded});
      out.write(mc_cum.common.out, mc_cum.common.format,
                manifest_line("measure-cumulants",
                              mc_cum.describe(" capacity=" + std::to_string(mc_cum_capacity) +
                                              " time=" + std::to_string(mc_cum.time))));
    } else if (*mhist) {
      bbs::mc::MeasurementPlan plan;
      plan.ensemble = mc_hist.ensemble.resolve();
      plan.capacity = mc_hist_capacity;
      plan.time = mc_hist.time;
      plan.samples = mc_hist.samples;
      plan.seed = mc_hist.seed;
      plan.workers = mc_hist.workers;
      plan.batches = mc_hist.batches;
      plan.allow_wrap = mc_hist.allow_wrap;
      const auto r = bbs::mc::measure_cumulants(plan);
      auto [a, z] = plan.ensemble.az();
      const bool iid = plan.ensemble.kind == bbs::mc::Ensemble::Kind::Iid;
      // theory overlay: saddle-point-normalized exp(-t G(N/t))
      const double t = static_cast<double>(plan.time);
      std::vector<double> theory(r.histogram.counts.size(), 0.0);
      if (iid && plan.time > 0) {
        double norm = 0.0;
        for (std::size_t i = 0; i < theory.size(); ++i) {
          const double n = static_cast<double>(r.histogram.lo + static_cast<long long>(i));
          const double j = n / t;
          if (j > 0.0 && j < static_cast<double>(mc_hist_capacity)) {
            const auto rp = bbs::ldf::rate(z, mc_hist_capacity, j);
            const double fpp =
                bbs::ldf::scgf_second_derivative(z, mc_hist_capacity, rp.multiplier);
            theory[i] = std::exp(-t * rp.value) / std::sqrt(fpp);
          }
          norm += theory[i];
        }
        if (norm > 0.0)
          for (auto& v : theory) v /= norm;
      }
      Output out({"N", "count", "theory_prob"});
      for (std::size_t i = 0; i < r.histogram.counts.size(); ++i)
        out.add({r.histogram.lo + static_cast<long long>(i), r.histogram.counts[i],
                 theory[i]});
      out.write(mc_hist.common.out, mc_hist.common.format,
                manifest_line("measure-histogram",
                              mc_hist.describe(" capacity=" + std::to_string(mc_hist_capacity) +
                                               " time=" + std::to_string(mc_hist.time))));
    } else if (*mcorr) {
      bbs::mc::MeasurementPlan plan;
      plan.ensemble = mc_corr.ensemble.resolve();
      plan.capacity = mc_corr_capacity;
      plan.dyn_capacity = mc_corr_n;
      plan.time = mc_corr.time;
      plan.idx_m = mc_corr_m;
      plan.idx_i = mc_corr_i;
      plan.idx_j = mc_corr_j;
      plan.samples = mc_corr.samples;
      plan.seed = mc_corr.seed;
      plan.workers = mc_corr.workers;
      plan.batches = mc_corr.batches;
      plan.allow_wrap = mc_corr.allow_wrap;
      const auto r = bbs::mc::measure_generalized_correlation(plan);
      Output out({"name", "params", "estimate", "stderr", "n_samples", "n_excluded"});
      out.add({"C^{m,l,n}_{i,j}",
               mc_corr.ensemble.describe() + ";m=" + std::to_string(mc_corr_m) +
                   ";l=" + std::to_string(mc_corr_capacity) +
                   ";n=" + std::to_string(plan.dynamics()) +
                   ";i=" + std::to_string(mc_corr_i) + ";j=" + std::to_string(mc_corr_j) +
                   ";time=" + std::to_string(mc_corr.time),
               r.value, r.error, r.samples, r.excluded});
      out.write(mc_corr.common.out, mc_corr.common.format,
                manifest_line("measure-correlation",
                              mc_corr.describe(" m=" + std::to_string(mc_corr_m) + " l=" +
                                               std::to_string(mc_corr_capacity) + " n=" +
                                               std::to_string(plan.dynamics()) + " i=" +
                                               std::to_string(mc_corr_i) + " j=" +
                                               std::to_string(mc_corr_j) + " time=" +
                                               std::to_string(mc_corr.time))));
    } else if (*mpseudo) {
      bbs::mc::MeasurementPlan plan;
      plan.ensemble = mc_pseudo.ensemble.resolve();
      plan.samples = mc_pseudo.samples;
      plan.seed = mc_pseudo.seed;
      plan.workers = mc_pseudo.workers;
      plan.batches = mc_pseudo.batches;
      plan.time = 0;
      const auto r = bbs::mc::measure_pseudoenergy_covariance(plan, mc_pseudo_imax);
      auto [a, z] = plan.ensemble.az();
      auto prof = bbs::tba::profile(a, z, std::max(mc_pseudo_imax + 2, 16));
      Output out({"i", "j", "estimate", "stderr", "prediction", "n_samples", "n_excluded"});
      for (int i = 1; i <= mc_pseudo_imax; ++i)
        for (int j = i; j <= mc_pseudo_imax; ++j) {
          const std::size_t idx = static_cast<std::size_t>((i - 1) * mc_pseudo_imax + (j - 1));
          const double pred =
              i == j ? bbs::tba::pseudoenergy_cov_prediction(prof, i) : 0.0;
          out.add({i, j, r.value[idx], r.error[idx], pred, r.samples, r.excluded});
        }
      out.write(mc_pseudo.common.out, mc_pseudo.common.format,
                manifest_line("measure-pseudoenergy",
                              mc_pseudo.describe(" imax=" + std::to_string(mc_pseudo_imax))));
    } else if (*msum) {
      bbs::mc::MeasurementPlan plan;
      plan.ensemble = mc_sum.ensemble.resolve();
      plan.capacity = mc_sum_capacity;
      plan.time = mc_sum.time;
      plan.samples = mc_sum.samples;
      plan.seed = mc_sum.seed;
      plan.workers = mc_sum.workers;
      plan.batches = mc_sum.batches;
      plan.allow_wrap = mc_sum.allow_wrap;
      const auto r = bbs::mc::sum_rule_check(
          plan, mc_sum_weight == "abs" ? bbs::mc::SumRuleWeight::AbsX
                                       : bbs::mc::SumRuleWeight::SquareX);
      Output out({"name", "params", "estimate", "stderr", "n_samples", "n_excluded"});
      const std::string params = mc_sum.ensemble.describe() +
                                 ";capacity=" + std::to_string(mc_sum_capacity) +
                                 ";time=" + std::to_string(mc_sum.time) +
                                 ";weight=" + mc_sum_weight;
      out.add({"lhs", params, r.lhs, r.lhs_error, r.samples, r.excluded});
      out.add({"rhs", params, r.rhs, r.rhs_error, r.samples, r.excluded});
      out.add({"discrepancy", params, r.discrepancy, r.discrepancy_error, r.samples,
               r.excluded});
      out.add({"z_score", params, r.z_score, 0.0, r.samples, r.excluded});
      out.write(mc_sum.common.out, mc_sum.common.format,
                manifest_line("sum-rule-check",
                              mc_sum.describe(" capacity=" + std::to_string(mc_sum_capacity) +
                                              " time=" + std::to_string(mc_sum.time) +
                                              " weight=" + mc_sum_weight)));
    }
  } catch (const bbs::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const bbs::InvalidTemperature& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const bbs::Error& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
