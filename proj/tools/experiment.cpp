#include "experiment.hpp"

#include "radnls/dynamics.hpp"
#include "radnls/errors.hpp"
#include "radnls/groundstate.hpp"
#include "radnls/propagator.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace radnls::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::optional<Scenario> parse_scenario(const std::string& s) {
  if (s == "groundstate")
    return Scenario::groundstate;
  if (s == "evolve")
    return Scenario::evolve;
  if (s == "dispersive")
    return Scenario::dispersive;
  if (s == "sweep")
    return Scenario::sweep;
  if (s == "virial-check")
    return Scenario::virial_check;
  return std::nullopt;
}

std::string to_string(Scenario s) {
  switch (s) {
  case Scenario::groundstate:
    return "groundstate";
  case Scenario::evolve:
    return "evolve";
  case Scenario::dispersive:
    return "dispersive";
  case Scenario::sweep:
    return "sweep";
  case Scenario::virial_check:
    return "virial-check";
  }
  return "?";
}

namespace {

std::string fmt17(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + fmt17(v[i]);
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + v[i];
  return s;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

// key -> setter; each returns false on a malformed value
using Setter = bool (*)(ExperimentConfig&, const std::string&);

bool to_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool to_int(const std::string& s, long long& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool to_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  for (const auto& item : split(s)) {
    double x;
    if (!to_double(item, x))
      return false;
    out.push_back(x);
  }
  return true;
}

#define DOUBLE_KEY(field)                                                                          \
  [](ExperimentConfig& c, const std::string& v) { return to_double(v, c.field); }
#define INT_KEY(field)                                                                             \
  [](ExperimentConfig& c, const std::string& v) {                                                  \
    long long x;                                                                                   \
    if (!to_int(v, x))                                                                             \
      return false;                                                                                \
    c.field = static_cast<decltype(c.field)>(x);                                                   \
    return true;                                                                                   \
  }
#define LIST_KEY(field) [](ExperimentConfig& c, const std::string& v) { return to_list(v, c.field); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"scenario",
       [](ExperimentConfig& c, const std::string& v) {
         auto s = parse_scenario(v);
         if (s)
           c.scenario = *s;
         return s.has_value();
       }},
      {"params.d", INT_KEY(d)},
      {"params.a", DOUBLE_KEY(a)},
      {"params.p", DOUBLE_KEY(p)},
      {"grid.R_max", DOUBLE_KEY(R_max)},
      {"grid.N", INT_KEY(N)},
      {"time.dt",
       [](ExperimentConfig& c, const std::string& v) {
         double x;
         if (!to_double(v, x))
           return false;
         c.dt = x;
         return true;
       }},
      {"time.T", DOUBLE_KEY(T)},
      {"time.sample_every", INT_KEY(sample_every)},
      {"data.profile",
       [](ExperimentConfig& c, const std::string& v) {
         c.data.kind = v;
         return true;
       }},
      {"data.amplitude", DOUBLE_KEY(data.amplitude)},
      {"data.width", DOUBLE_KEY(data.width)},
      {"data.scale", DOUBLE_KEY(data.scale)},
      {"data.path",
       [](ExperimentConfig& c, const std::string& v) {
         c.data.path = v;
         return true;
       }},
      {"data.perturbation", DOUBLE_KEY(data.perturbation)},
      {"diagnostics.R_loc", DOUBLE_KEY(R_loc)},
      {"diagnostics.morawetz_R_list", LIST_KEY(morawetz_R_list)},
      {"diagnostics.morawetz_T_list", LIST_KEY(morawetz_T_list)},
      {"output.dir",
       [](ExperimentConfig& c, const std::string& v) {
         c.out_dir = v;
         return true;
       }},
      {"output.formats",
       [](ExperimentConfig& c, const std::string& v) {
         c.formats = split(v);
         return true;
       }},
      {"seed", INT_KEY(seed)},
      {"workers", INT_KEY(workers)},
      {"groundstate.mode",
       [](ExperimentConfig& c, const std::string& v) {
         c.groundstate_mode = v;
         return true;
       }},
      {"sweep.a_list", LIST_KEY(sweep_a)},
      {"sweep.p_list", LIST_KEY(sweep_p)},
      {"dispersive.t_list", LIST_KEY(dispersive_t)},
      {"dispersive.bound", DOUBLE_KEY(dispersive_bound)},
      {"virial.t0", DOUBLE_KEY(virial_t0)},
      {"virial.t1", DOUBLE_KEY(virial_t1)},
      {"virial.truncated_R", DOUBLE_KEY(truncated_R)},
  };
  return m;
}

#undef DOUBLE_KEY
#undef INT_KEY
#undef LIST_KEY

void flatten(const boost::property_tree::ptree& t, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  for (const auto& [k, child] : t) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (child.empty())
      out.emplace_back(key, child.data());
    else
      flatten(child, key, out);
  }
}

} // namespace

ParsedConfig parse_config(const std::string& text) {
  // ini_parser only knows full-line comments; drop trailing " # ..." and " ; ..."
  std::string cleaned;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      for (std::size_t i = 1; i < line.size(); ++i)
        if ((line[i] == '#' || line[i] == ';') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
          line.erase(i);
          break;
        }
      cleaned += line + "\n";
    }
  }
  boost::property_tree::ptree tree;
  std::istringstream is(cleaned);
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  std::vector<std::pair<std::string, std::string>> kv;
  flatten(tree, "", kv);
  ParsedConfig out;
  for (const auto& [k, v] : kv) {
    const auto it = setters().find(k);
    if (it == setters().end()) {
      out.findings.push_back({k, "unknown key"});
      continue;
    }
    if (!it->second(out.config, v))
      out.findings.push_back({k, "malformed value '" + v + "'"});
    if (k == "scenario")
      out.scenario_given = true;
  }
  return out;
}

ParsedConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<Finding> validate(const ExperimentConfig& c) {
  std::vector<Finding> f;
  auto check_params = [&](int d, double a, double p, const std::string& where) {
    if (d < 3) {
      f.push_back({where + "params.d", "d must be >= 3"});
      return;
    }
    if (!(p > 1.0)) {
      f.push_back({where + "params.p", "p must be > 1"});
      return;
    }
    const double h = 0.5 * (d - 2);
    if (!(a > -h * h)) {
      f.push_back({where + "params.a", "a = " + fmt17(a) + " <= -((d-2)/2)^2 = " + fmt17(-h * h) +
                                           " violates positivity of L_a"});
      return;
    }
    const Admissibility adm = Params::make(d, a, p).admissibility();
    if (!adm.admissible)
      f.push_back({where + "params", "inadmissible (d, a, p): " + adm.reason});
  };
  if (c.scenario == Scenario::sweep) {
    if (c.sweep_a.empty())
      f.push_back({"sweep.a_list", "required for sweep"});
    if (c.sweep_p.empty())
      f.push_back({"sweep.p_list", "required for sweep"});
    if (c.d < 3)
      f.push_back({"params.d", "d must be >= 3"});
  } else {
    check_params(c.d, c.a, c.p, "");
  }
  if (!(c.R_max > 0.0))
    f.push_back({"grid.R_max", "must be positive"});
  if (c.N < 8)
    f.push_back({"grid.N", "must be >= 8"});
  const bool timed = c.scenario == Scenario::evolve || c.scenario == Scenario::virial_check ||
                     (c.scenario == Scenario::sweep && c.dt.has_value());
  if ((c.scenario == Scenario::evolve || c.scenario == Scenario::virial_check) && !c.dt)
    f.push_back({"time.dt", "required for " + to_string(c.scenario)});
  if (timed && c.dt) {
    if (!(*c.dt > 0.0))
      f.push_back({"time.dt", "must be positive"});
    if (!(c.T > 0.0))
      f.push_back({"time.T", "must be positive"});
    else if (*c.dt > 0.0 && c.R_max > 0.0 && c.N >= 8) {
      // guard |dt| rho_max^2 <= pi, McMahon estimate of the N-th zero
      const double h = 0.5 * (c.d - 2);
      const double nu = std::sqrt(std::max(0.0, h * h + c.a));
      const double rm = (c.N + 0.5 * nu - 0.25) * 3.141592653589793 / c.R_max;
      if (*c.dt * rm * rm > 3.141592653589793)
        f.push_back({"time.dt", "dt * rho_max^2 = " + fmt17(*c.dt * rm * rm) + " exceeds pi"});
    }
  }
  if (c.sample_every < 1)
    f.push_back({"time.sample_every", "must be >= 1"});
  const std::set<std::string> kinds{"gaussian", "ground_state", "file"};
  if (!kinds.count(c.data.kind))
    f.push_back({"data.profile", "unknown profile '" + c.data.kind + "'"});
  if (c.data.kind == "file") {
    if (c.data.path.empty())
      f.push_back({"data.path", "required for profile=file"});
    else if (!fs::is_regular_file(c.data.path))
      f.push_back({"data.path", "not a readable file: " + c.data.path});
  }
  if (c.data.kind == "gaussian" && !(c.data.width > 0.0))
    f.push_back({"data.width", "must be positive"});
  if (!(c.R_loc > 0.0))
    f.push_back({"diagnostics.R_loc", "must be positive"});
  for (const auto& fmt : c.formats)
    if (fmt != "csv" && fmt != "json")
      f.push_back({"output.formats", "unknown format '" + fmt + "'"});
  if (c.formats.empty())
    f.push_back({"output.formats", "at least one of csv, json"});
  if (fs::exists(c.out_dir) && !fs::is_directory(c.out_dir))
    f.push_back({"output.dir", "exists and is not a directory"});
  if (c.workers < 1)
    f.push_back({"workers", "must be >= 1"});
  if (c.groundstate_mode != "galerkin" && c.groundstate_mode != "collocation")
    f.push_back({"groundstate.mode", "galerkin or collocation"});
  if (c.scenario == Scenario::dispersive) {
    if (c.dispersive_t.empty())
      f.push_back({"dispersive.t_list", "required"});
    for (double t : c.dispersive_t)
      if (!(t > 0.0))
        f.push_back({"dispersive.t_list", "times must be positive"});
  }
  if (c.scenario == Scenario::virial_check && !(c.virial_t1 > c.virial_t0))
    f.push_back({"virial.t1", "must exceed virial.t0"});
  if (c.truncated_R != 0.0 && !(c.truncated_R > 1.0))
    f.push_back({"virial.truncated_R", "must be 0 (off) or > 1"});
  if (c.scenario == Scenario::evolve)
    for (double T : c.morawetz_T_list)
      if (!(T > 0.0) || T > c.T)
        f.push_back({"diagnostics.morawetz_T_list", "times must lie in (0, time.T]"});
  return f;
}

std::string canonical(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv{
      {"scenario", to_string(c.scenario)},
      {"params.d", std::to_string(c.d)},
      {"params.a", fmt17(c.a)},
      {"params.p", fmt17(c.p)},
      {"grid.R_max", fmt17(c.R_max)},
      {"grid.N", std::to_string(c.N)},
      {"time.dt", c.dt ? fmt17(*c.dt) : "none"},
      {"time.T", fmt17(c.T)},
      {"time.sample_every", std::to_string(c.sample_every)},
      {"data.profile", c.data.kind},
      {"data.amplitude", fmt17(c.data.amplitude)},
      {"data.width", fmt17(c.data.width)},
      {"data.scale", fmt17(c.data.scale)},
      {"data.path", c.data.path},
      {"data.perturbation", fmt17(c.data.perturbation)},
      {"diagnostics.R_loc", fmt17(c.R_loc)},
      {"diagnostics.morawetz_R_list", join(c.morawetz_R_list)},
      {"diagnostics.morawetz_T_list", join(c.morawetz_T_list)},
      {"output.formats", join(c.formats)},
      {"seed", std::to_string(c.seed)},
      {"groundstate.mode", c.groundstate_mode},
      {"sweep.a_list", join(c.sweep_a)},
      {"sweep.p_list", join(c.sweep_p)},
      {"dispersive.t_list", join(c.dispersive_t)},
      {"dispersive.bound", fmt17(c.dispersive_bound)},
      {"virial.t0", fmt17(c.virial_t0)},
      {"virial.t1", fmt17(c.virial_t1)},
      {"virial.truncated_R", fmt17(c.truncated_R)},
  };
  // output.dir and workers do not change the numbers and stay out of the hash
  std::string s;
  for (const auto& [k, v] : kv)
    s += k + " = " + v + "\n";
  return s;
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

struct Context {
  const ExperimentConfig& cfg;
  std::string hash;
  fs::path dir;
  RunResult result;

  bool wants(const std::string& fmt) const {
    return std::find(cfg.formats.begin(), cfg.formats.end(), fmt) != cfg.formats.end();
  }

  std::string header() const {
    std::string flat = canonical(cfg);
    std::replace(flat.begin(), flat.end(), '\n', ';');
    return "# hash=" + hash + " config=" + flat + "\n";
  }

  void write(const std::string& stem, const std::string& ext, const std::string& body) {
    const fs::path file = dir / (stem + "-" + hash + "." + ext);
    std::ofstream out(file, std::ios::binary);
    if (ext == "csv")
      out << header();
    out << body;
    if (!out)
      throw std::runtime_error("cannot write " + file.string());
    result.files.push_back(file);
  }

  void write_json(const std::string& stem, json doc) {
    doc["hash"] = hash;
    doc["config"] = json::object();
    std::istringstream is(canonical(cfg));
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find(" = ");
      doc["config"][line.substr(0, eq)] = line.substr(eq + 3);
    }
    write(stem, "json", doc.dump(2) + "\n");
  }
};

GroundStateOptions gs_options(const ExperimentConfig& c) {
  GroundStateOptions o;
  o.mode = c.groundstate_mode == "collocation" ? GroundStateMode::collocation : GroundStateMode::galerkin;
  return o;
}

// Linear interpolation of a two- or three-column (r, re[, im]) table.
RadialField load_profile(const BasisPtr& b, const std::string& path) {
  std::ifstream in(path);
  std::vector<double> r, re, im;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0])))
      continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, y, z = 0.0;
    if (!(ls >> x >> y))
      throw ParseError("data.path: cannot parse line '" + line + "'");
    ls >> z;
    r.push_back(x);
    re.push_back(y);
    im.push_back(z);
  }
  if (r.size() < 2)
    throw ParseError("data.path: need at least two samples");
  return RadialField::from_function(b, [&](double x) -> cplx {
    if (x < r.front() || x > r.back())
      return x < r.front() ? cplx(re.front(), im.front()) : cplx(0.0);
    const auto it = std::upper_bound(r.begin(), r.end(), x);
    const std::size_t j = std::min<std::size_t>(it - r.begin(), r.size() - 1);
    const double w = (x - r[j - 1]) / (r[j] - r[j - 1]);
    return cplx((1 - w) * re[j - 1] + w * re[j], (1 - w) * im[j - 1] + w * im[j]);
  });
}

RadialField initial_data(const ExperimentConfig& c, const BasisPtr& b,
                         const std::optional<GroundStateReport>& rep) {
  RadialField u;
  if (c.data.kind == "gaussian") {
    const double s = b->params.sigma, w = c.data.width, A = c.data.amplitude;
    u = RadialField::from_function(
        b, [=](double r) { return A * std::pow(r, -s) * std::exp(-r * r / (2 * w * w)); });
  } else if (c.data.kind == "ground_state") {
    u = RadialField{b, Domain::physical, c.data.scale * to_physical(rep->Q)};
  } else {
    u = load_profile(b, c.data.path);
  }
  if (c.data.perturbation != 0.0) {
    // three seeded Gaussian bumps, same singular factor as the data
    std::mt19937_64 gen(c.seed);
    std::uniform_real_distribution<double> amp(-1.0, 1.0), ctr(0.0, 4.0), wid(0.5, 2.0);
    double a[3], m[3], w[3];
    for (int i = 0; i < 3; ++i) {
      a[i] = amp(gen);
      m[i] = ctr(gen);
      w[i] = wid(gen);
    }
    const double peak = u.v.cwiseAbs().maxCoeff();
    const double s = b->params.sigma;
    for (int k = 0; k < b->N; ++k) {
      const double r = b->r(k);
      double g = 0.0;
      for (int i = 0; i < 3; ++i)
        g += a[i] * std::exp(-std::pow((r - m[i]) / w[i], 2));
      u.v(k) += c.data.perturbation * peak * g * std::pow(r, -s) * std::exp(-r * r / 64.0);
    }
  }
  return u;
}

json classification_json(const DataClassification& dc) {
  return json{{"below_threshold", dc.below_threshold}, {"ME", dc.ME},
              {"MH", dc.MH},
              {"ME_ratio", dc.ME_ratio},
              {"MH_ratio", dc.MH_ratio},
              {"energy", dc.energy},
              {"coercive", dc.coercive},
              {"coercivity_margin", dc.coercivity_margin},
              {"delta", dc.delta},
              {"delta_prime", dc.delta_prime},
              {"c", dc.c}};
}

std::string status_of(const DiagnosticsSeries& s) {
  switch (s.status) {
  case RunStatus::completed:
    return "completed";
  case RunStatus::breach:
    return "blowup-breach";
  case RunStatus::step_budget:
    return "step-budget";
  }
  return "?";
}

void run_groundstate(Context& ctx) {
  const auto& c = ctx.cfg;
  const Params P = Params::make(c.d, c.a, c.p);
  const auto b = build_basis(P, c.R_max, c.N);
  const GroundStateReport rep = solve_ground_state(P, b, gs_options(c));
  if (ctx.wants("json")) {
    json doc = json::parse(to_json(rep));
    doc["pohozaev_ratios"] = {{"mass_over_pnorm", rep.mass / rep.pnorm},
                              {"kinetic_over_pnorm", rep.kinetic_a / rep.pnorm}};
    ctx.write_json("groundstate", doc);
  }
  if (ctx.wants("csv")) {
    std::ostringstream os;
    os << std::setprecision(17) << "r,Q\n";
    for (int k = 0; k < b->N; ++k)
      os << b->r(k) << ',' << rep.Q.v(k).real() << '\n';
    ctx.write("groundstate", "csv", os.str());
  }
  std::ostringstream s;
  s << std::setprecision(10) << "M/P = " << rep.mass / rep.pnorm << ", K/P = " << rep.kinetic_a / rep.pnorm
    << ", C_a = " << rep.C_a << ", elliptic residual = " << rep.residuals.elliptic;
  ctx.result.summary = s.str();
}

EvolveOptions evolve_options(const ExperimentConfig& c) {
  EvolveOptions o;
  o.dt = *c.dt;
  o.sample_every = c.sample_every;
  o.R_loc = c.R_loc;
  o.truncated_R = c.truncated_R;
  o.morawetz_radii = c.morawetz_R_list;
  return o;
}

void run_evolve(Context& ctx, bool virial_only) {
  const auto& c = ctx.cfg;
  const Params P = Params::make(c.d, c.a, c.p);
  const auto b = build_basis(P, c.R_max, c.N);
  const GroundStateReport rep = solve_ground_state(P, b, gs_options(c));
  const RadialField u0 = initial_data(c, b, rep);
  SimState state = SimState::from_field(u0);
  const DiagnosticsSeries ser = evolve(state, c.T, evolve_options(c));
  if (ctx.wants("csv"))
    ctx.write(to_string(c.scenario), "csv", to_csv(ser));

  json doc;
  doc["status"] = status_of(ser);
  doc["steps"] = ser.steps;
  doc["t_final"] = ser.rows.back().t;
  if (ser.status == RunStatus::breach)
    doc["breach_time"] = ser.breach_time;
  const auto& r0 = ser.rows.front();
  double dm = 0.0, de = 0.0;
  for (const auto& r : ser.rows) {
    dm = std::max(dm, std::abs(r.mass / r0.mass - 1.0));
    de = std::max(de, std::abs(r.energy / r0.energy - 1.0));
  }
  doc["mass_drift"] = dm;
  doc["energy_drift"] = de;
  doc["initial_data"] = classification_json(classify_data(u0, rep));
  std::ostringstream s;
  if (virial_only) {
    const VirialCheck vc = virial_identity_check(ser, c.virial_t0, c.virial_t1);
    doc["virial"] = {{"max_residual", vc.max_residual},
                     {"scale", vc.scale},
                     {"points", vc.points},
                     {"truncated_max_residual", std::isnan(vc.truncated_max_residual)
                                                    ? json(nullptr)
                                                    : json(vc.truncated_max_residual)},
                     {"interpolation_min", vc.interpolation_min}};
    s << "virial residual " << vc.max_residual << " over " << vc.points << " points";
  } else {
    try {
      const RunClassification rc = classify_run(ser, rep);
      doc["verdict"] = to_string(rc.verdict);
      doc["evidence"] = {{"local_mass_ratio", rc.local_mass_ratio},
                         {"max_MH_ratio", rc.max_MH_ratio},
                         {"MH_bound", rc.MH_bound},
                         {"breach", rc.breach}};
      s << "verdict " << to_string(rc.verdict);
    } catch (const UsageError& e) {
      doc["verdict"] = "unclassified";
      doc["evidence"] = {{"reason", e.what()}};
      s << "verdict unclassified (" << e.what() << ")";
    }
    json mw = json::array();
    for (double R : c.morawetz_R_list)
      for (double T : c.morawetz_T_list) {
        try {
          const MorawetzCheck m = morawetz_check(ser, R, T);
          mw.push_back({{"R", R}, {"T", T}, {"lhs", m.lhs}, {"ratio", m.ratio},
                        {"bound_terms", {m.bound_terms[0], m.bound_terms[1], m.bound_terms[2]}}});
        } catch (const UsageError&) {
          mw.push_back({{"R", R}, {"T", T}, {"lhs", nullptr}, {"reason", "series does not reach T"}});
        }
      }
    doc["morawetz"] = mw;
  }
  if (ctx.wants("json"))
    ctx.write_json(to_string(c.scenario), doc);
  s << ", status " << status_of(ser) << ", mass drift " << dm << ", energy drift " << de;
  ctx.result.summary = s.str();
  if (ser.status == RunStatus::breach) {
    ctx.result.status = "blowup-breach";
    ctx.result.exit_code = 3;
  }
}

void run_dispersive(Context& ctx) {
  const auto& c = ctx.cfg;
  const Params P = Params::make(c.d, c.a, c.p);
  const auto b = build_basis(P, c.R_max, c.N);
  std::optional<GroundStateReport> rep;
  if (c.data.kind == "ground_state")
    rep = solve_ground_state(P, b, gs_options(c));
  const RadialField f = initial_data(c, b, rep);
  const std::string branch = P.a >= 0.0 ? "unweighted" : "weighted";
  std::vector<double> ratio;
  for (double t : c.dispersive_t)
    ratio.push_back(dispersive_ratio(P, f, t));
  const double hi = *std::max_element(ratio.begin(), ratio.end());
  const double lo = *std::min_element(ratio.begin(), ratio.end());
  if (ctx.wants("csv")) {
    std::ostringstream os;
    os << std::setprecision(17) << "t,ratio\n";
    for (std::size_t i = 0; i < ratio.size(); ++i)
      os << c.dispersive_t[i] << ',' << ratio[i] << '\n';
    ctx.write("dispersive", "csv", os.str());
  }
  if (ctx.wants("json")) {
    json doc{{"branch", branch}, {"t", c.dispersive_t}, {"ratio", ratio},
             {"max_over_min", hi / lo}, {"bound", c.dispersive_bound},
             {"within_bound", hi / lo <= c.dispersive_bound}};
    ctx.write_json("dispersive", doc);
  }
  std::ostringstream s;
  s << branch << " ratio max/min = " << hi / lo << " (bound " << c.dispersive_bound << ")";
  ctx.result.summary = s.str();
}

struct SweepPoint {
  double a, p;
  json row;
};

void run_sweep(Context& ctx) {
  const auto& c = ctx.cfg;
  std::vector<SweepPoint> pts;
  for (double a : c.sweep_a)
    for (double p : c.sweep_p)
      pts.push_back({a, p, json()});
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < pts.size(); i = next++) {
      SweepPoint& pt = pts[i];
      json row{{"a", pt.a}, {"p", pt.p}};
      try {
        const double h = 0.5 * (c.d - 2);
        if (!(pt.a > -h * h) || !(pt.p > 1.0)) {
          row["admissible"] = false;
          row["reason"] = "outside a > -((d-2)/2)^2, p > 1";
        } else {
          const Params P = Params::make(c.d, pt.a, pt.p);
          const Admissibility adm = P.admissibility();
          row["admissible"] = adm.admissible;
          if (!adm.admissible) {
            row["reason"] = adm.reason;
          } else {
            const auto b = build_basis(P, c.R_max, c.N);
            const GroundStateReport rep = solve_ground_state(P, b, gs_options(c));
            row["branch"] = adm.branch;
            row["threshold_ME"] = rep.threshold_ME;
            row["threshold_MH"] = rep.threshold_MH;
            row["C_a"] = rep.C_a;
            row["elliptic_residual"] = rep.residuals.elliptic;
            const RadialField u0 = initial_data(c, b, rep);
            const DataClassification dc = classify_data(u0, rep);
            row["ME_ratio"] = dc.ME_ratio;
            row["MH_ratio"] = dc.MH_ratio;
            row["below_threshold"] = dc.below_threshold;
            if (c.dt) {
              SimState st = SimState::from_field(u0);
              const DiagnosticsSeries ser = evolve(st, c.T, evolve_options(c));
              row["status"] = status_of(ser);
              try {
                row["verdict"] = to_string(classify_run(ser, rep).verdict);
              } catch (const UsageError&) {
                row["verdict"] = "unclassified";
              }
            }
          }
        }
      } catch (const std::exception& e) {
        row["error"] = e.what();
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error.empty())
          first_error = e.what();
      }
      pt.row = std::move(row);
    }
  };
  const int nw = std::max(1, std::min<int>(c.workers, static_cast<int>(pts.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i + 1 < nw; ++i)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();

  // one file per point, then the table in grid order
  if (ctx.wants("json"))
    for (std::size_t i = 0; i < pts.size(); ++i)
      ctx.write_json("sweep-point" + std::to_string(i), pts[i].row);
  const std::vector<std::string> cols{"a", "p", "admissible", "branch", "threshold_ME", "threshold_MH",
                                      "C_a", "ME_ratio", "MH_ratio", "below_threshold", "status", "verdict"};
  if (ctx.wants("csv")) {
    std::ostringstream os;
    os << std::setprecision(17) << join(cols) << '\n';
    for (const auto& pt : pts) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        if (j)
          os << ',';
        const auto it = pt.row.find(cols[j]);
        if (it == pt.row.end())
          continue;
        if (it->is_number_float())
          os << it->get<double>();
        else if (it->is_string())
          os << it->get<std::string>();
        else
          os << it->dump();
      }
      os << '\n';
    }
    ctx.write("sweep", "csv", os.str());
  }
  int admissible = 0;
  for (const auto& pt : pts)
    admissible += pt.row.value("admissible", false) ? 1 : 0;
  ctx.result.summary = std::to_string(pts.size()) + " grid points, " + std::to_string(admissible) + " admissible";
  if (!first_error.empty())
    throw std::runtime_error("sweep point failed: " + first_error);
}

} // namespace

RunResult run(const ExperimentConfig& cfg) {
  const auto findings = validate(cfg);
  if (!findings.empty())
    throw UsageError("config has " + std::to_string(findings.size()) + " finding(s); run validate");
  Context ctx{cfg, config_hash(cfg), fs::path(cfg.out_dir), {}};
  ctx.result.status = "ok";
  fs::create_directories(ctx.dir);
  switch (cfg.scenario) {
  case Scenario::groundstate:
    run_groundstate(ctx);
    break;
  case Scenario::evolve:
    run_evolve(ctx, false);
    break;
  case Scenario::virial_check:
    run_evolve(ctx, true);
    break;
  case Scenario::dispersive:
    run_dispersive(ctx);
    break;
  case Scenario::sweep:
    run_sweep(ctx);
    break;
  }
  return ctx.result;
}

} // namespace radnls::cli
