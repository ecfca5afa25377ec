#include "amenpois/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "amenpois/errors.hpp"

namespace amenpois {

using nlohmann::json;

namespace {

/// Typed field access that records an issue instead of throwing.
class Fields {
 public:
  explicit Fields(std::vector<std::string>& issues) : issues_(issues) {}

  void issue(const std::string& msg) { issues_.push_back(msg); }

  const json* find(const json& obj, const std::string& key) {
    if (!obj.is_object()) return nullptr;
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& path, bool required) {
    const json* v = find(obj, key);
    if (!v) {
      if (required) issue(path + ": required");
      return std::nullopt;
    }
    if (!v->is_number()) {
      issue(path + ": must be a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& key, const std::string& path, bool required) {
    const json* v = find(obj, key);
    if (!v) {
      if (required) issue(path + ": required");
      return std::nullopt;
    }
    if (!v->is_number_integer()) {
      issue(path + ": must be an integer");
      return std::nullopt;
    }
    return v->get<std::int64_t>();
  }

  std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path, bool required) {
    const json* v = find(obj, key);
    if (!v) {
      if (required) issue(path + ": required");
      return std::nullopt;
    }
    if (!v->is_string()) {
      issue(path + ": must be a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  void probability(const std::optional<double>& v, const std::string& path) {
    if (v && !(*v >= 0.0 && *v <= 1.0)) issue(path + ": must lie in [0, 1]");
  }

  void at_least(const std::optional<std::int64_t>& v, std::int64_t lo, const std::string& path) {
    if (v && *v < lo) issue(path + ": must be >= " + std::to_string(lo));
  }

 private:
  std::vector<std::string>& issues_;
};

std::optional<MetricGroup> build_group(const json& cfg, Fields& f) {
  const json* g = f.find(cfg, "group");
  if (!g) return std::nullopt;
  if (!g->is_object()) {
    f.issue("group: must be an object");
    return std::nullopt;
  }
  const auto type = f.string(*g, "type", "group.type", true);
  if (!type) return std::nullopt;
  try {
    if (*type == "grid") {
      const auto rank = f.integer(*g, "rank", "group.rank", true);
      f.at_least(rank, 1, "group.rank");
      if (rank && *rank >= 1) return MetricGroup::grid(static_cast<int>(*rank));
    } else if (*type == "fin_gen") {
      const json* gens = f.find(*g, "generators");
      if (!gens || !gens->is_array() || gens->empty()) {
        f.issue("group.generators: must be a non-empty array of integer vectors");
        return std::nullopt;
      }
      std::vector<std::vector<int>> vecs;
      for (const auto& v : *gens) {
        if (!v.is_array()) {
          f.issue("group.generators: must be a non-empty array of integer vectors");
          return std::nullopt;
        }
        std::vector<int> c;
        for (const auto& x : v) {
          if (!x.is_number_integer()) {
            f.issue("group.generators: entries must be integers");
            return std::nullopt;
          }
          c.push_back(x.get<int>());
        }
        vecs.push_back(std::move(c));
      }
      std::vector<std::string> names;
      if (const json* nm = f.find(*g, "names"); nm && nm->is_array())
        for (const auto& x : *nm) names.push_back(x.get<std::string>());
      return MetricGroup::finitely_generated(std::move(vecs), std::move(names));
    } else if (*type == "sym") {
      const auto n_max = f.integer(*g, "n_max", "group.n_max", true);
      f.at_least(n_max, 1, "group.n_max");
      if (n_max && *n_max >= 1) return MetricGroup::symmetric(static_cast<int>(*n_max));
    } else {
      f.issue("group.type: must be one of grid, fin_gen, sym");
    }
  } catch (const std::exception& e) {
    f.issue(std::string("group: ") + e.what());
  }
  return std::nullopt;
}

std::optional<SimulatorSpec> build_simulator(const json& cfg, const std::optional<MetricGroup>& group, Fields& f) {
  const json* s = f.find(cfg, "simulator");
  if (!s || !s->is_object()) {
    f.issue("simulator: required object");
    return std::nullopt;
  }
  const auto type = f.string(*s, "type", "simulator.type", true);
  if (!type) return std::nullopt;
  const bool scaled = f.find(*s, "mean_count") != nullptr;

  // The calibrated parameter is derived from mean_count; giving both is ambiguous.
  auto exclusive = [&](const char* key) {
    if (scaled && f.find(*s, key)) f.issue(std::string("simulator.") + key + ": conflicts with simulator.mean_count");
  };

  auto dim = [&](int fallback) {
    const auto d = f.integer(*s, "dim", "simulator.dim", false);
    f.at_least(d, 1, "simulator.dim");
    return static_cast<int>(d.value_or(fallback));
  };
  auto lattice_group_check = [&](int d) {
    if (group && (group->kind() != GroupKind::grid || group->rank() != d))
      f.issue("group: lattice simulators act through grid(dim); got a different group");
  };

  if (*type == "iid_field") {
    IidField sim;
    sim.dim = dim(1);
    exclusive("p");
    const auto p = f.number(*s, "p", "simulator.p", !scaled);
    f.probability(p, "simulator.p");
    sim.p = p.value_or(0.0);
    lattice_group_check(sim.dim);
    return sim;
  }
  if (*type == "mdep_field") {
    MdepField sim;
    sim.dim = dim(1);
    const auto w = f.integer(*s, "width", "simulator.width", true);
    f.at_least(w, 1, "simulator.width");
    sim.width = static_cast<int>(w.value_or(1));
    exclusive("tau");
    const auto tau = f.number(*s, "tau", "simulator.tau", !scaled);
    f.probability(tau, "simulator.tau");
    sim.tau = tau.value_or(0.5);
    lattice_group_check(sim.dim);
    return sim;
  }
  if (*type == "ising_field") {
    IsingField sim;
    sim.dim = dim(2);
    exclusive("h");
    if (const auto beta = f.number(*s, "beta", "simulator.beta", true)) sim.beta = *beta;
    if (const auto h = f.number(*s, "h", "simulator.h", !scaled)) sim.h = *h;
    const auto burn = f.integer(*s, "burn_in", "simulator.burn_in", false);
    f.at_least(burn, 0, "simulator.burn_in");
    sim.burn_in = static_cast<int>(burn.value_or(200));
    const auto margin = f.integer(*s, "margin", "simulator.margin", false);
    f.at_least(margin, 0, "simulator.margin");
    sim.margin = static_cast<int>(margin.value_or(2));
    if (!sim.in_dobrushin_regime())
      f.issue("simulator.beta: 2 dim tanh(beta) must be < 1 (Dobrushin regime)");
    lattice_group_check(sim.dim);
    return sim;
  }
  if (*type == "exch_seq") {
    ExchSeq sim;
    const json* mix = f.find(*s, "mixture");
    if (!mix || !mix->is_array() || mix->empty()) {
      f.issue("simulator.mixture: must be a non-empty array of [theta, weight] pairs");
      return std::nullopt;
    }
    double total = 0.0;
    for (const auto& atom : *mix) {
      if (!atom.is_array() || atom.size() != 2 || !atom[0].is_number() || !atom[1].is_number()) {
        f.issue("simulator.mixture: must be a non-empty array of [theta, weight] pairs");
        return std::nullopt;
      }
      const double theta = atom[0].get<double>();
      const double w = atom[1].get<double>();
      if (!(theta >= 0.0)) f.issue("simulator.mixture: theta must be >= 0");
      if (!(w >= 0.0 && w <= 1.0)) f.issue("simulator.mixture: weights must lie in [0, 1]");
      total += w;
      sim.mixture.emplace_back(theta, w);
    }
    if (std::abs(total - 1.0) > 1e-9) f.issue("simulator.mixture: weights must sum to 1");
    if (scaled) f.issue("simulator.mean_count: not applicable to exch_seq (theta is the mean)");
    return sim;
  }
  if (*type == "cayley_perc") {
    if (!group || group->kind() != GroupKind::fin_gen) {
      f.issue("group: cayley_perc needs a fin_gen group");
      return std::nullopt;
    }
    CayleyPerc sim{*group, 0.5, 0};
    const auto p = f.number(*s, "p", "simulator.p", true);
    f.probability(p, "simulator.p");
    if (p && (*p <= 0.0 || *p >= 1.0)) f.issue("simulator.p: must lie in (0, 1) for percolation");
    sim.p = p.value_or(0.5);
    const auto d = f.integer(*s, "d_n", "simulator.d_n", false);
    f.at_least(d, 0, "simulator.d_n");
    sim.d_n = static_cast<int>(d.value_or(0));
    if (scaled) f.issue("simulator.mean_count: not applicable to cayley_perc");
    return sim;
  }
  if (*type == "planar_poisson") {
    PlanarPoisson sim;
    auto positive = [&](const char* key, double& out, bool strict) {
      const std::string path = std::string("simulator.") + key;
      if (const auto v = f.number(*s, key, path, false)) {
        if (strict ? !(*v > 0.0) : !(*v >= 0.0)) f.issue(path + (strict ? ": must be > 0" : ": must be >= 0"));
        out = *v;
      }
    };
    positive("intensity", sim.intensity, false);
    positive("delta", sim.delta, false);
    positive("kappa", sim.kappa, false);
    if (scaled) f.issue("simulator.mean_count: not applicable to planar_poisson");
    return sim;
  }
  f.issue("simulator.type: must be one of iid_field, mdep_field, ising_field, exch_seq, cayley_perc, planar_poisson");
  return std::nullopt;
}

std::optional<RandomizedSpec> build_mode(const json& cfg, Fields& f, std::optional<double>& j_per_site) {
  const json* m = f.find(cfg, "mode");
  if (!m || (m->is_string() && m->get<std::string>() == "deterministic")) return std::nullopt;
  if (!m->is_object()) {
    f.issue("mode: must be \"deterministic\" or a randomized object");
    return std::nullopt;
  }
  const auto type = f.string(*m, "type", "mode.type", true);
  if (type && *type == "deterministic") return std::nullopt;
  if (type && *type != "randomized") {
    f.issue("mode.type: must be deterministic or randomized");
    return std::nullopt;
  }
  RandomizedSpec r;
  const json* j = f.find(*m, "j");
  if (!j || !j->is_object()) {
    f.issue("mode.j: required object {type, value | per_site}");
  } else {
    const auto jt = f.string(*j, "type", "mode.j.type", true);
    if (jt && *jt != "fixed" && *jt != "poisson") f.issue("mode.j.type: must be fixed or poisson");
    r.j_dist.kind = jt && *jt == "poisson" ? JDist::Kind::poisson : JDist::Kind::fixed;
    const auto value = f.number(*j, "value", "mode.j.value", false);
    const auto per_site = f.number(*j, "per_site", "mode.j.per_site", false);
    if (!value && !per_site) f.issue("mode.j: one of value or per_site is required");
    if (value && !(*value >= 0.0)) f.issue("mode.j.value: must be >= 0");
    if (value && r.j_dist.kind == JDist::Kind::fixed && *value != std::floor(*value))
      f.issue("mode.j.value: fixed J must be an integer");
    if (per_site && !(*per_site >= 0.0)) f.issue("mode.j.per_site: must be >= 0");
    r.j_dist.value = value.value_or(0.0);
    j_per_site = per_site;
  }
  if (const auto a = f.number(*m, "alpha", "mode.alpha", false)) {
    if (!(*a > 0.0 && *a < 1.0)) f.issue("mode.alpha: must lie in (0, 1)");
    r.alpha = *a;
  }
  if (const auto b = f.number(*m, "beta", "mode.beta", false)) {
    if (!(*b > 0.0 && *b < 1.0)) f.issue("mode.beta: must lie in (0, 1)");
    r.beta = *b;
  }
  if (const auto s = f.number(*m, "spread_const", "mode.spread_const", false)) {
    if (!(*s >= 1.0)) f.issue("mode.spread_const: uniform locations need a value >= 1");
    r.spread_const = *s;
  }
  return r;
}

MixingInput build_mixing(const json& cfg, const std::optional<SimulatorSpec>& sim, Fields& f) {
  MixingInput in;
  std::string model = "auto";
  const json* m = f.find(cfg, "mixing");
  if (m) {
    if (!m->is_object()) {
      f.issue("mixing: must be an object");
      return in;
    }
    model = f.string(*m, "model", "mixing.model", true).value_or("auto");
  }
  auto range = [&]() {
    const auto r = m ? f.integer(*m, "range", "mixing.range", false) : std::nullopt;
    f.at_least(r, 0, "mixing.range");
    return r;
  };
  auto rho = [&]() {
    const auto r = m ? f.number(*m, "rho", "mixing.rho", false) : std::nullopt;
    if (r && !(*r > 0.0 && *r < 1.0)) f.issue("mixing.rho: must lie in (0, 1)");
    return r;
  };
  if (model == "auto") {
    if (!sim) return in;
    if (const auto* md = std::get_if<MdepField>(&*sim)) {
      in.kind = MixingModel::m_dependent;
      in.range = md->width;
    } else if (const auto* is = std::get_if<IsingField>(&*sim)) {
      in.kind = MixingModel::geometric;
      in.rho = is->dobrushin_rho();
    } else if (std::holds_alternative<CayleyPerc>(*sim)) {
      in.kind = MixingModel::cayley;
    }
  } else if (model == "zero") {
    in.kind = MixingModel::zero;
  } else if (model == "m_dependent") {
    in.kind = MixingModel::m_dependent;
    const auto r = range();
    if (!r) f.issue("mixing.range: required for m_dependent");
    in.range = static_cast<int>(r.value_or(0));
  } else if (model == "geometric") {
    in.kind = MixingModel::geometric;
    const auto r = rho();
    if (r) {
      in.rho = *r;
    } else if (sim && std::holds_alternative<IsingField>(*sim)) {
      in.rho = std::get<IsingField>(*sim).dobrushin_rho();
    } else {
      f.issue("mixing.rho: required for geometric");
    }
  } else if (model == "cayley") {
    in.kind = MixingModel::cayley;
  } else {
    f.issue("mixing.model: must be one of auto, zero, m_dependent, geometric, cayley");
  }
  return in;
}

std::optional<Scenario> build(const json& cfg, std::vector<std::string>& issues) {
  Fields f(issues);
  if (!cfg.is_object()) {
    f.issue("config: must be a JSON object");
    return std::nullopt;
  }
  Scenario sc;
  if (const auto name = f.string(cfg, "scenario", "scenario", true)) {
    if (name->empty() || name->find_first_of("/\\ ,") != std::string::npos)
      f.issue("scenario: must be a non-empty name without separators, spaces, or commas");
    sc.name = *name;
  }
  const auto group = build_group(cfg, f);
  const auto sim = build_simulator(cfg, group, f);
  if (sim) sc.simulator = *sim;
  if (sim && f.find(cfg["simulator"], "mean_count")) {
    const auto mc = f.number(cfg["simulator"], "mean_count", "simulator.mean_count", true);
    if (mc && !(*mc >= 0.0)) f.issue("simulator.mean_count: must be >= 0");
    sc.mean_count = mc;
  }

  if (const json* grid = f.find(cfg, "n_grid"); !grid || !grid->is_array() || grid->empty()) {
    f.issue("n_grid: required non-empty array of integers");
  } else {
    for (const auto& v : *grid) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
        f.issue("n_grid: entries must be integers >= 1");
        sc.n_grid.clear();
        break;
      }
      sc.n_grid.push_back(v.get<int>());
    }
    for (std::size_t i = 1; i < sc.n_grid.size(); ++i)
      if (sc.n_grid[i] <= sc.n_grid[i - 1]) {
        f.issue("n_grid: must be strictly increasing");
        break;
      }
  }

  if (const json* b = f.find(cfg, "b_n"); !b) {
    f.issue("b_n: required (integer or one integer per n)");
  } else if (b->is_number_integer()) {
    if (b->get<std::int64_t>() < 1) f.issue("b_n: must be >= 1");
    sc.b_n.assign(sc.n_grid.size(), b->get<int>());
  } else if (b->is_array()) {
    for (const auto& v : *b) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
        f.issue("b_n: entries must be integers >= 1");
        break;
      }
      sc.b_n.push_back(v.get<int>());
    }
    if (sc.b_n.size() != sc.n_grid.size()) f.issue("b_n: needs exactly one value per n_grid entry");
  } else {
    f.issue("b_n: must be an integer or an array of integers");
  }

  const auto m = f.integer(cfg, "m_reps", "m_reps", true);
  f.at_least(m, 100, "m_reps");
  sc.m_reps = m.value_or(100);
  if (const auto k = f.integer(cfg, "k_max", "k_max", false)) {
    f.at_least(k, 1, "k_max");
    sc.k_max = static_cast<int>(*k);
  }
  if (const json* seed = f.find(cfg, "master_seed"); !seed) {
    f.issue("master_seed: required");
  } else if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0)) {
    f.issue("master_seed: must be a nonnegative integer");
  } else {
    sc.seed = seed->get<std::uint64_t>();
  }
  sc.randomized = build_mode(cfg, f, sc.j_per_site);
  sc.mixing = build_mixing(cfg, sim, f);
  if (const auto t = f.number(cfg, "poisson_target", "poisson_target", false)) {
    if (!(*t >= 0.0)) f.issue("poisson_target: must be >= 0");
    sc.poisson_target = t;
  }
  if (const auto c = f.integer(cfg, "residue_cutoff", "residue_cutoff", false)) {
    f.at_least(c, 1, "residue_cutoff");
    sc.residue_cutoff = static_cast<int>(*c);
  }
  if (sim) {
    if (std::holds_alternative<PlanarPoisson>(*sim) && !sc.randomized)
      f.issue("mode: planar_poisson scenarios need the randomized mode");
    if (std::holds_alternative<ExchSeq>(*sim) && sc.randomized)
      f.issue("mode: exch_seq scenarios support the deterministic mode only");
  }
  if (const json* out = f.find(cfg, "output"); out && !out->is_object()) f.issue("output: must be an object");
  if (!issues.empty()) return std::nullopt;
  try {
    check_scenario(sc);
  } catch (const DomainError& e) {
    f.issue(std::string("scenario: ") + e.what());
    return std::nullopt;
  }
  return sc;
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::vector<std::string> validate_config(const json& cfg) {
  std::vector<std::string> issues;
  build(cfg, issues);
  return issues;
}

LoadedConfig parse_config(json cfg, std::optional<std::uint64_t> seed_override) {
  if (seed_override && cfg.is_object()) cfg["master_seed"] = *seed_override;
  std::vector<std::string> issues;
  auto sc = build(cfg, issues);
  if (!sc) throw ValidationError(std::move(issues));
  LoadedConfig out;
  out.scenario = std::move(*sc);
  out.out_dir = "results";
  if (const auto it = cfg.find("output"); it != cfg.end() && it->contains("dir")) out.out_dir = (*it)["dir"].get<std::string>();
  out.config_hash = config_hash(cfg);
  out.raw = std::move(cfg);
  return out;
}

LoadedConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"config: cannot open " + path});
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("config: JSON parse error: ") + e.what()});
  }
  return parse_config(std::move(cfg), seed_override);
}

std::uint64_t config_hash(const json& cfg) {
  json canon = cfg;
  if (canon.is_object()) {
    canon.erase("output");
    canon.erase("workers");
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int resolve_workers(int cli_workers) {
  if (const char* env = std::getenv("AMENPOIS_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return std::max(1, cli_workers);
}

std::string csv_header() {
  return "scenario,n,window_size,b_n,k,lambda_hat,lambda_stderr,tv,tv_stderr,bound_total,term_boundary,term_gamma,"
         "term_psi,term_xi,seed,config_hash";
}

std::string csv_row(const std::string& scenario, const ExperimentRow& row, std::uint64_t seed, std::uint64_t hash) {
  const ParamVector cluster = row.lambda.cluster_rates();
  double var = 0.0;
  for (std::size_t k = 0; k < row.lambda.stderr_.size(); ++k) {
    const double se = row.lambda.k_weighted ? row.lambda.stderr_[k] / static_cast<double>(k + 1) : row.lambda.stderr_[k];
    var += se * se;
  }
  std::ostringstream o;
  o << scenario << ',' << row.n << ',' << row.window_size << ',' << row.b_n << ',' << row.lambda.k_max() << ','
    << fmt_num(cluster.total()) << ',' << fmt_num(std::sqrt(var)) << ',' << fmt_num(row.tv) << ','
    << fmt_num(row.tv_stderr) << ',';
  if (row.bound) {
    o << fmt_num(row.bound->total) << ',' << fmt_num(row.bound->term_boundary) << ',' << fmt_num(row.bound->term_gamma)
      << ',' << fmt_num(row.bound->term_psi) << ',' << fmt_num(row.bound->term_xi) << ',';
  } else {
    o << ",,,,,";
  }
  o << seed << ',' << hex_hash(hash);
  return o.str();
}

json row_json(const ExperimentRow& row) {
  json j;
  j["n"] = row.n;
  j["window_size"] = row.window_size;
  j["b_n"] = row.b_n;
  j["k_max"] = row.lambda.k_max();
  j["lambda_hat"] = row.lambda.rates;
  j["lambda_stderr"] = row.lambda.stderr_;
  j["lambda_k_weighted"] = row.lambda.k_weighted;
  const ParamVector cluster = row.lambda.cluster_rates();
  j["cluster_rates"] = std::vector<double>(cluster.rates().begin(), cluster.rates().end());
  j["mean_w"] = row.lambda.mean_w;
  j["mean_w_stderr"] = row.lambda.mean_w_stderr;
  j["tv"] = row.tv;
  j["tv_stderr"] = row.tv_stderr;
  if (row.tv_lambda_hat) j["tv_lambda_hat"] = *row.tv_lambda_hat;
  if (row.tv_vs_mean) j["tv_vs_poisson_mean"] = *row.tv_vs_mean;
  if (row.bound) {
    const auto& b = *row.bound;
    json parts = json::object();
    for (const auto& [name, v] : b.parts) parts[name] = num_or_null(v);
    j["bound"] = {{"variant", variant_name(b.variant)},
                  {"p", std::isinf(b.p) ? json("inf") : json(b.p)},
                  {"h0", b.h0},
                  {"h1", b.h1},
                  {"total", num_or_null(b.total)},
                  {"term_boundary", num_or_null(b.term_boundary)},
                  {"term_gamma", b.term_gamma},
                  {"term_psi", b.term_psi},
                  {"term_xi", b.term_xi},
                  {"psi_last_term", b.psi_last_term},
                  {"xi_last_term", b.xi_last_term},
                  {"parts", parts}};
  } else {
    j["bound"] = nullptr;
  }
  if (row.d_n) j["d_n"] = *row.d_n;
  if (row.edges) j["template_edges"] = *row.edges;
  if (row.epsilon) j["epsilon_n"] = *row.epsilon;
  if (row.radii) {
    j["c_n"] = row.radii->c_n;
    j["k_n"] = row.radii->k_n;
    j["c_n_below_unit"] = row.radii->below_unit;
    j["c_n_saturated"] = row.radii->saturated;
  }
  if (!row.atoms.empty()) {
    json atoms = json::array();
    for (const auto& a : row.atoms)
      atoms.push_back({{"theta", a.theta},
                       {"weight", a.weight},
                       {"rate", a.rate},
                       {"empirical_rate", a.empirical_rate},
                       {"empirical_stderr", a.empirical_stderr},
                       {"reps", a.reps}});
    j["atoms"] = atoms;
  }
  j["w_pmf"] = row.w_dist.pmf;
  j["wall_seconds"] = row.wall_seconds;
  return j;
}

RunOutcome run_experiment(const LoadedConfig& cfg, int workers, const std::optional<std::string>& out_dir) {
  const Scenario& sc = cfg.scenario;
  const std::filesystem::path dir = out_dir.value_or(cfg.out_dir);
  std::filesystem::create_directories(dir);
  RunOutcome out;
  out.csv_path = (dir / (sc.name + ".csv")).string();
  out.json_path = (dir / (sc.name + ".json")).string();
  out.result.scenario = sc.name;
  out.result.seed = sc.seed;

  std::ofstream csv(out.csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw ResourceError("cannot write " + out.csv_path);
  csv << csv_header() << '\n';
  for (std::size_t i = 0; i < sc.n_grid.size(); ++i) {
    try {
      ExperimentRow row = run_point(sc, i, workers);
      csv << csv_row(sc.name, row, sc.seed, cfg.config_hash) << '\n';
      csv.flush();
      out.result.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      out.complete = false;
      out.error = "n=" + std::to_string(sc.n_grid[i]) + ": " + e.what();
      break;
    }
  }
  if (!out.complete) csv << "# incomplete: " << out.error << '\n';
  csv.close();

  json res;
  res["scenario"] = sc.name;
  res["master_seed"] = sc.seed;
  res["config_hash"] = hex_hash(cfg.config_hash);
  res["config"] = cfg.raw;
  res["complete"] = out.complete;
  if (!out.complete) res["error"] = out.error;
  res["rows"] = json::array();
  for (const auto& r : out.result.rows) res["rows"].push_back(row_json(r));
  std::ofstream js(out.json_path, std::ios::binary | std::ios::trunc);
  if (!js) throw ResourceError("cannot write " + out.json_path);
  js << res.dump(2) << '\n';
  return out;
}

}  // namespace amenpois
