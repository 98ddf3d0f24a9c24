#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypoctrl/core.hpp"
#include "hypoctrl/hermite.hpp"
#include "hypoctrl/lr_cost.hpp"
#include "hypoctrl/phase_space.hpp"

namespace hypoctrl::config {

using json = nlohmann::json;
using Table = std::vector<std::vector<double>>;

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"analyze", "evolve", "dissipation", "spectral", "cost", "control", "chain"};
  return c;
}

inline const std::vector<std::string>& presets() {
  static const std::vector<std::string> p = {"heat", "kolmogorov", "kfp", "harmonic", "catalogue-k0", "chain"};
  return p;
}

struct ChainConfig {
  double a = 2.0, b = 2.0, c = 1.0;
  double alpha = 1.0, alpha1 = 1.0, alpha2 = 1.0;
  bool operator==(const ChainConfig&) const = default;
};

struct SymbolConfig {
  Table M_re, M_im;
  bool operator==(const SymbolConfig&) const = default;
};

struct OUConfig {
  Table Q, B;
  bool operator==(const OUConfig&) const = default;
};

struct RegionConfig {
  std::string kind = "complement_of_ball";
  int n = 1;  // whole_space, lattice
  std::vector<double> center;  // complement_of_ball
  double radius = 1.0;
  Table centers;  // union_of_balls
  std::vector<double> radii;
  std::vector<double> normal;  // half_space
  double offset = 0.0;
  double spacing = 4.0;  // ball_lattice
  double r = 1.0;
  bool operator==(const RegionConfig&) const = default;
};

struct Numerics {
  int N = 16;
  int grid_points = 128;
  double half_width = 8.0;
  int nt = 256;
  double T = 1.0;
  std::vector<double> times;  // empty: command default
  std::vector<int> k_list;
  std::vector<double> cutoffs;
  double eps = 0.0;  // 0: 1e-8 trace / D
  double tolerance = 1e-10;
  int n_sphere = 400;
  int modes = 2048;
  int refine = 4;
  bool dump_gramian = false;
  bool verify = false;  // control: compare with LR constants from measured profiles
  bool operator==(const Numerics&) const = default;
};

struct F0Config {
  std::vector<double> center;
  double width = 1.0;
  bool operator==(const F0Config&) const = default;
};

struct RunConfig {
  std::string command;
  std::optional<std::string> preset;
  double a = 1.0;  // kfp potential
  int n = 1;       // dimension for heat, harmonic, kolmogorov (d), catalogue
  int k0 = 1;      // catalogue
  std::optional<ChainConfig> chain;
  std::optional<SymbolConfig> symbol;
  std::optional<OUConfig> ou;
  std::optional<RegionConfig> region;
  Numerics numerics;
  std::optional<lr::LRParams> params;
  std::optional<F0Config> f0;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool operator==(const RunConfig& o) const {
    auto same_params = [](const std::optional<lr::LRParams>& x, const std::optional<lr::LRParams>& y) {
      if (x.has_value() != y.has_value()) return false;
      if (!x) return true;
      return x->c1 == y->c1 && x->c2 == y->c2 && x->a == y->a && x->b == y->b && x->m == y->m && x->t0 == y->t0;
    };
    return command == o.command && preset == o.preset && a == o.a && n == o.n && k0 == o.k0 && chain == o.chain &&
           symbol == o.symbol && ou == o.ou && region == o.region && numerics == o.numerics &&
           same_params(params, o.params) && f0 == o.f0 && seed == o.seed && threads == o.threads;
  }
};

struct Violation {
  std::string pointer;
  std::string message;
};

struct ParseResult {
  std::optional<RunConfig> config;
  std::vector<Violation> violations;
  bool unknown_preset = false;
  int exit_code() const { return unknown_preset ? 3 : violations.empty() ? 0 : 2; }
  std::string summary() const {
    std::string s;
    for (const Violation& v : violations) s += (v.pointer.empty() ? "/" : v.pointer) + ": " + v.message + "\n";
    return s;
  }
};

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<Violation>& out) : out_(out) {}

  void fail(const std::string& ptr, const std::string& msg) { out_.push_back({ptr, msg}); }

  bool object(const json& j, const std::string& ptr) {
    if (!j.is_object()) {
      fail(ptr, "expected an object");
      return false;
    }
    return true;
  }

  void only(const json& obj, const std::string& ptr, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) fail(ptr + "/" + it.key(), "unknown key");
  }

  bool number(const json& obj, const std::string& ptr, const char* key, double& dst) {
    if (!obj.contains(key)) return false;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(ptr + "/" + key, "expected a number");
      return false;
    }
    dst = v.get<double>();
    return true;
  }

  bool integer(const json& obj, const std::string& ptr, const char* key, int& dst) {
    if (!obj.contains(key)) return false;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(ptr + "/" + key, "expected an integer");
      return false;
    }
    dst = v.get<int>();
    return true;
  }

  bool boolean(const json& obj, const std::string& ptr, const char* key, bool& dst) {
    if (!obj.contains(key)) return false;
    if (!obj.at(key).is_boolean()) {
      fail(ptr + "/" + key, "expected a boolean");
      return false;
    }
    dst = obj.at(key).get<bool>();
    return true;
  }

  bool string(const json& obj, const std::string& ptr, const char* key, std::string& dst) {
    if (!obj.contains(key)) return false;
    if (!obj.at(key).is_string()) {
      fail(ptr + "/" + key, "expected a string");
      return false;
    }
    dst = obj.at(key).get<std::string>();
    return true;
  }

  template <class T>
  bool list(const json& obj, const std::string& ptr, const char* key, std::vector<T>& dst) {
    if (!obj.contains(key)) return false;
    const json& v = obj.at(key);
    const std::string p = ptr + "/" + key;
    if (!v.is_array()) {
      fail(p, "expected an array");
      return false;
    }
    dst.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const bool ok = std::is_integral_v<T> ? v[i].is_number_integer() : v[i].is_number();
      if (!ok) {
        fail(p + "/" + std::to_string(i), std::is_integral_v<T> ? "expected an integer" : "expected a number");
        return false;
      }
      dst.push_back(v[i].get<T>());
    }
    return true;
  }

  bool table(const json& obj, const std::string& ptr, const char* key, Table& dst, bool required) {
    if (!obj.contains(key)) {
      if (required) fail(ptr + "/" + key, "required");
      return false;
    }
    const json& v = obj.at(key);
    const std::string p = ptr + "/" + key;
    if (!v.is_array() || v.empty()) {
      fail(p, "expected a nonempty array of rows");
      return false;
    }
    dst.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::vector<double> row;
      json wrapper = {{"row", v[i]}};
      if (!list(wrapper, p, "row", row)) {
        if (!out_.empty()) out_.back().pointer = p + "/" + std::to_string(i);
        return false;
      }
      if (!dst.empty() && row.size() != dst.front().size()) {
        fail(p + "/" + std::to_string(i), "ragged rows");
        return false;
      }
      dst.push_back(std::move(row));
    }
    return true;
  }

  void check(bool cond, const std::string& ptr, const std::string& msg) {
    if (!cond) fail(ptr, msg);
  }

 private:
  std::vector<Violation>& out_;
};

inline bool square(const Table& t) { return !t.empty() && t.size() == t.front().size(); }

}  // namespace detail

inline ParseResult parse_config(const std::string& text) {
  ParseResult res;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    res.violations.push_back({"", std::string("malformed JSON: ") + e.what()});
    return res;
  }
  detail::Reader rd(res.violations);
  if (!rd.object(doc, "")) return res;
  rd.only(doc, "", {"command", "preset", "a", "n", "k0", "chain", "symbol", "ou", "region", "numerics", "params",
                    "f0", "seed", "threads"});
  RunConfig cfg;
  if (!rd.string(doc, "", "command", cfg.command)) {
    if (!doc.contains("command")) rd.fail("/command", "required");
  } else if (std::find(commands().begin(), commands().end(), cfg.command) == commands().end()) {
    rd.fail("/command", "unknown command '" + cfg.command + "'");
  }

  std::string preset;
  if (rd.string(doc, "", "preset", preset)) {
    if (std::find(presets().begin(), presets().end(), preset) == presets().end()) {
      rd.fail("/preset", "unknown preset '" + preset + "'");
      res.unknown_preset = true;
    }
    cfg.preset = preset;
  }
  rd.number(doc, "", "a", cfg.a);
  if (rd.integer(doc, "", "n", cfg.n)) rd.check(cfg.n >= 1 && cfg.n <= 6, "/n", "must lie in [1, 6]");
  if (rd.integer(doc, "", "k0", cfg.k0)) rd.check(cfg.k0 >= 0 && cfg.k0 <= 11, "/k0", "must lie in [0, 11]");
  if (cfg.preset == "catalogue-k0")
    rd.check(cfg.k0 <= 2 * cfg.n - 1 && (cfg.k0 == 0 || cfg.n >= 2), "/k0", "catalogue needs k0 <= 2n-1 and n >= 2 for k0 >= 1");
  if (cfg.preset == "kolmogorov") rd.check(cfg.n <= 3, "/n", "kolmogorov dimension d must be <= 3");

  if (doc.contains("chain") && rd.object(doc["chain"], "/chain")) {
    const json& c = doc["chain"];
    rd.only(c, "/chain", {"a", "b", "c", "alpha", "alpha1", "alpha2"});
    ChainConfig ch;
    rd.number(c, "/chain", "a", ch.a);
    rd.number(c, "/chain", "b", ch.b);
    rd.number(c, "/chain", "c", ch.c);
    rd.number(c, "/chain", "alpha", ch.alpha);
    rd.number(c, "/chain", "alpha1", ch.alpha1);
    rd.number(c, "/chain", "alpha2", ch.alpha2);
    rd.check(ch.alpha > 0, "/chain/alpha", "must be positive");
    rd.check(ch.alpha1 > 0, "/chain/alpha1", "must be positive");
    rd.check(ch.alpha2 > 0, "/chain/alpha2", "must be positive");
    cfg.chain = ch;
  }

  if (doc.contains("symbol") && rd.object(doc["symbol"], "/symbol")) {
    const json& s = doc["symbol"];
    rd.only(s, "/symbol", {"n", "M_re", "M_im"});
    SymbolConfig sc;
    int n = 0;
    const bool has_n = rd.integer(s, "/symbol", "n", n);
    if (!s.contains("n")) rd.fail("/symbol/n", "required");
    const bool re = rd.table(s, "/symbol", "M_re", sc.M_re, true);
    if (!rd.table(s, "/symbol", "M_im", sc.M_im, false) && re) sc.M_im.assign(sc.M_re.size(), std::vector<double>(sc.M_re.size(), 0.0));
    if (re && has_n) {
      rd.check(n >= 1 && n <= 6, "/symbol/n", "must lie in [1, 6]");
      rd.check(detail::square(sc.M_re) && static_cast<int>(sc.M_re.size()) == 2 * n, "/symbol/M_re", "must be 2n x 2n");
      rd.check(sc.M_im.size() == sc.M_re.size() && detail::square(sc.M_im), "/symbol/M_im", "must match M_re");
    }
    cfg.symbol = sc;
  }

  if (doc.contains("ou") && rd.object(doc["ou"], "/ou")) {
    const json& o = doc["ou"];
    rd.only(o, "/ou", {"Q", "B"});
    OUConfig oc;
    const bool q = rd.table(o, "/ou", "Q", oc.Q, true);
    const bool b = rd.table(o, "/ou", "B", oc.B, true);
    if (q && b) {
      rd.check(detail::square(oc.Q) && oc.Q.size() <= 6, "/ou/Q", "must be square, n <= 6");
      rd.check(detail::square(oc.B) && oc.B.size() == oc.Q.size(), "/ou/B", "must be square and match Q");
    }
    cfg.ou = oc;
  }

  if (doc.contains("region") && rd.object(doc["region"], "/region")) {
    const json& r = doc["region"];
    rd.only(r, "/region", {"kind", "n", "center", "radius", "centers", "radii", "normal", "offset", "spacing", "r"});
    RegionConfig rc;
    if (!rd.string(r, "/region", "kind", rc.kind) && !r.contains("kind")) rd.fail("/region/kind", "required");
    static const std::set<std::string> kinds = {"whole_space", "complement_of_ball", "union_of_balls", "half_space",
                                                "ball_lattice"};
    if (!kinds.count(rc.kind)) rd.fail("/region/kind", "unknown region kind '" + rc.kind + "'");
    if (rd.integer(r, "/region", "n", rc.n)) rd.check(rc.n >= 1 && rc.n <= 4, "/region/n", "must lie in [1, 4]");
    rd.list(r, "/region", "center", rc.center);
    if (rd.number(r, "/region", "radius", rc.radius)) rd.check(rc.radius >= 0, "/region/radius", "must be nonnegative");
    rd.table(r, "/region", "centers", rc.centers, rc.kind == "union_of_balls");
    rd.list(r, "/region", "radii", rc.radii);
    rd.list(r, "/region", "normal", rc.normal);
    rd.number(r, "/region", "offset", rc.offset);
    if (rd.number(r, "/region", "spacing", rc.spacing)) rd.check(rc.spacing > 0, "/region/spacing", "must be positive");
    if (rd.number(r, "/region", "r", rc.r)) rd.check(rc.r > 0, "/region/r", "must be positive");
    if (rc.kind == "complement_of_ball") rd.check(!rc.center.empty() && rc.center.size() <= 4, "/region/center", "required, dimension <= 4");
    if (rc.kind == "half_space") rd.check(!rc.normal.empty() && rc.normal.size() <= 4, "/region/normal", "required, dimension <= 4");
    if (rc.kind == "union_of_balls") rd.check(rc.radii.size() == rc.centers.size(), "/region/radii", "one radius per center");
    if (rc.kind == "ball_lattice") rd.check(2 * rc.r <= rc.spacing, "/region/r", "lattice balls overlap (2r > spacing)");
    cfg.region = rc;
  }

  if (doc.contains("numerics") && rd.object(doc["numerics"], "/numerics")) {
    const json& m = doc["numerics"];
    const std::string p = "/numerics";
    rd.only(m, p, {"N", "grid_points", "half_width", "nt", "T", "times", "k_list", "cutoffs", "eps", "tolerance",
                   "n_sphere", "modes", "refine", "dump_gramian", "verify"});
    Numerics& nm = cfg.numerics;
    if (rd.integer(m, p, "N", nm.N)) rd.check(nm.N >= 1 && nm.N <= 200, p + "/N", "must lie in [1, 200]");
    if (rd.integer(m, p, "grid_points", nm.grid_points))
      rd.check(nm.grid_points >= 8 && nm.grid_points <= 4096, p + "/grid_points", "must lie in [8, 4096]");
    if (rd.number(m, p, "half_width", nm.half_width)) rd.check(nm.half_width > 0, p + "/half_width", "must be positive");
    if (rd.integer(m, p, "nt", nm.nt))
      rd.check(nm.nt >= 16 && (nm.nt & (nm.nt - 1)) == 0, p + "/nt", "must be a power of two >= 16");
    if (rd.number(m, p, "T", nm.T)) rd.check(nm.T > 0, p + "/T", "must be positive");
    if (rd.list(m, p, "times", nm.times))
      rd.check(std::all_of(nm.times.begin(), nm.times.end(), [](double t) { return t > 0; }), p + "/times", "must be positive");
    if (rd.list(m, p, "k_list", nm.k_list))
      rd.check(std::all_of(nm.k_list.begin(), nm.k_list.end(), [](int k) { return k >= 0; }), p + "/k_list", "must be nonnegative");
    if (rd.list(m, p, "cutoffs", nm.cutoffs))
      rd.check(std::all_of(nm.cutoffs.begin(), nm.cutoffs.end(), [](double k) { return k > 0; }), p + "/cutoffs", "must be positive");
    if (rd.number(m, p, "eps", nm.eps)) rd.check(nm.eps >= 0, p + "/eps", "must be nonnegative");
    if (rd.number(m, p, "tolerance", nm.tolerance)) rd.check(nm.tolerance > 0 && nm.tolerance < 1, p + "/tolerance", "must lie in (0, 1)");
    if (rd.integer(m, p, "n_sphere", nm.n_sphere)) rd.check(nm.n_sphere >= 100, p + "/n_sphere", "must be at least 100");
    if (rd.integer(m, p, "modes", nm.modes)) rd.check(nm.modes >= 2 && nm.modes <= 100000, p + "/modes", "must lie in [2, 100000]");
    if (rd.integer(m, p, "refine", nm.refine)) rd.check(nm.refine >= 1 && nm.refine <= 64, p + "/refine", "must lie in [1, 64]");
    rd.boolean(m, p, "dump_gramian", nm.dump_gramian);
    rd.boolean(m, p, "verify", nm.verify);
  }

  if (doc.contains("params") && rd.object(doc["params"], "/params")) {
    const json& m = doc["params"];
    rd.only(m, "/params", {"c1", "c2", "a", "b", "m", "t0"});
    lr::LRParams lp;
    for (auto [key, dst] : {std::pair{"c1", &lp.c1}, {"c2", &lp.c2}, {"a", &lp.a}, {"b", &lp.b}, {"m", &lp.m}, {"t0", &lp.t0}}) {
      if (!m.contains(key)) {
        rd.fail(std::string("/params/") + key, "required");
        continue;
      }
      if (rd.number(m, "/params", key, *dst)) rd.check(*dst > 0, std::string("/params/") + key, "must be positive");
    }
    rd.check(lp.a < lp.b, "/params/b", "must exceed a");
    cfg.params = lp;
  }

  if (doc.contains("f0") && rd.object(doc["f0"], "/f0")) {
    const json& f = doc["f0"];
    rd.only(f, "/f0", {"center", "width"});
    F0Config fc;
    rd.list(f, "/f0", "center", fc.center);
    if (rd.number(f, "/f0", "width", fc.width)) rd.check(fc.width > 0, "/f0/width", "must be positive");
    cfg.f0 = fc;
  }

  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) rd.fail("/seed", "expected a nonnegative integer");
    else cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  int threads = 0;
  if (rd.integer(doc, "", "threads", threads)) {
    rd.check(threads >= 1, "/threads", "must be at least 1");
    cfg.threads = threads;
  }

  // command requirements
  const bool has_problem = cfg.preset || cfg.symbol || cfg.ou;
  rd.check(static_cast<int>(cfg.preset.has_value()) + cfg.symbol.has_value() + cfg.ou.has_value() <= 1, "/preset",
           "give at most one of preset, symbol, ou");
  if (cfg.command == "analyze") rd.check(has_problem, "/preset", "analyze needs a problem (preset, symbol or ou)");
  if (cfg.command == "evolve" || cfg.command == "dissipation")
    rd.check(cfg.ou || cfg.preset == "heat" || cfg.preset == "kolmogorov", "/preset",
             cfg.command + " needs an OU system (preset heat or kolmogorov, or ou)");
  if (cfg.command == "spectral") rd.check(cfg.region.has_value(), "/region", "spectral needs a region");
  if (cfg.command == "cost") rd.check(cfg.params.has_value(), "/params", "cost needs params");
  if (cfg.command == "control") {
    rd.check(has_problem, "/preset", "control needs a problem");
    rd.check(cfg.region.has_value(), "/region", "control needs a region");
  }
  if (cfg.command == "chain") rd.check(cfg.preset == "chain" || (!has_problem && cfg.chain), "/preset", "chain needs the chain preset");

  if (res.violations.empty()) res.config = std::move(cfg);
  return res;
}

inline json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  if (c.preset) j["preset"] = *c.preset;
  j["a"] = c.a;
  j["n"] = c.n;
  j["k0"] = c.k0;
  if (c.chain)
    j["chain"] = {{"a", c.chain->a}, {"b", c.chain->b}, {"c", c.chain->c},
                  {"alpha", c.chain->alpha}, {"alpha1", c.chain->alpha1}, {"alpha2", c.chain->alpha2}};
  if (c.symbol) j["symbol"] = {{"n", static_cast<int>(c.symbol->M_re.size() / 2)}, {"M_re", c.symbol->M_re}, {"M_im", c.symbol->M_im}};
  if (c.ou) j["ou"] = {{"Q", c.ou->Q}, {"B", c.ou->B}};
  if (c.region) {
    const RegionConfig& r = *c.region;
    json rj = {{"kind", r.kind}, {"n", r.n}, {"radius", r.radius}, {"offset", r.offset}, {"spacing", r.spacing}, {"r", r.r}};
    if (!r.center.empty()) rj["center"] = r.center;
    if (!r.centers.empty()) rj["centers"] = r.centers;
    if (!r.radii.empty()) rj["radii"] = r.radii;
    if (!r.normal.empty()) rj["normal"] = r.normal;
    j["region"] = rj;
  }
  const Numerics& m = c.numerics;
  json nj = {{"N", m.N}, {"grid_points", m.grid_points}, {"half_width", m.half_width}, {"nt", m.nt}, {"T", m.T},
             {"eps", m.eps}, {"tolerance", m.tolerance}, {"n_sphere", m.n_sphere}, {"modes", m.modes},
             {"refine", m.refine}, {"dump_gramian", m.dump_gramian}, {"verify", m.verify}};
  if (!m.times.empty()) nj["times"] = m.times;
  if (!m.k_list.empty()) nj["k_list"] = m.k_list;
  if (!m.cutoffs.empty()) nj["cutoffs"] = m.cutoffs;
  j["numerics"] = nj;
  if (c.params)
    j["params"] = {{"c1", c.params->c1}, {"c2", c.params->c2}, {"a", c.params->a},
                   {"b", c.params->b}, {"m", c.params->m}, {"t0", c.params->t0}};
  if (c.f0) {
    json fj = {{"width", c.f0->width}};
    if (!c.f0->center.empty()) fj["center"] = c.f0->center;
    j["f0"] = fj;
  }
  if (c.seed) j["seed"] = *c.seed;
  if (c.threads) j["threads"] = *c.threads;
  return j;
}

// ---------------------------------------------------------------------------
// Problem construction

inline Mat to_mat(const Table& t) {
  Mat m(t.size(), t.empty() ? 0 : t.front().size());
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t[i].size(); ++j) m(i, j) = t[i][j];
  return m;
}

inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

inline phase_space::ChainParams chain_params(const RunConfig& c) {
  const ChainConfig ch = c.chain.value_or(ChainConfig{});
  return {ch.a, ch.b, ch.c, ch.alpha, ch.alpha1, ch.alpha2};
}

inline std::optional<phase_space::OUSystem> ou_system(const RunConfig& c) {
  if (c.ou) return phase_space::OUSystem(to_mat(c.ou->Q), to_mat(c.ou->B));
  if (c.preset == "heat") return phase_space::heat_system(c.n);
  if (c.preset == "kolmogorov") return phase_space::kolmogorov_system(c.n);
  return std::nullopt;
}

inline phase_space::QuadraticSymbol symbol(const RunConfig& c) {
  if (c.symbol) return phase_space::QuadraticSymbol::from_parts(to_mat(c.symbol->M_re), to_mat(c.symbol->M_im));
  if (auto sys = ou_system(c)) return phase_space::build_ou_symbol(*sys);
  require(c.preset.has_value(), "no problem given");
  const std::string& p = *c.preset;
  if (p == "kfp") return phase_space::kfp_symbol(c.a);
  if (p == "harmonic") return phase_space::harmonic_symbol(c.n);
  if (p == "catalogue-k0") return phase_space::catalogue_symbol(c.k0, c.n);
  if (p == "chain") return phase_space::chain_preset(chain_params(c)).symbol;
  throw Error(ErrorKind::unknown_preset, "unknown preset '" + p + "'");
}

inline hermite::RegionSpec region(const RegionConfig& r) {
  using hermite::RegionSpec;
  if (r.kind == "whole_space") return RegionSpec::whole_space(r.n);
  if (r.kind == "complement_of_ball") return RegionSpec::complement_of_ball(to_vec(r.center), r.radius);
  if (r.kind == "half_space") return RegionSpec::half_space(to_vec(r.normal), r.offset);
  if (r.kind == "ball_lattice") return RegionSpec::ball_lattice(r.n, r.spacing, r.r);
  std::vector<RegionSpec::Ball> balls;
  for (std::size_t i = 0; i < r.centers.size(); ++i) balls.push_back({to_vec(r.centers[i]), r.radii[i]});
  return RegionSpec::union_of_balls(std::move(balls));
}

}  // namespace hypoctrl::config
