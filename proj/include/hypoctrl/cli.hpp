#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hypoctrl/config.hpp"
#include "hypoctrl/control.hpp"
#include "hypoctrl/hermite.hpp"
#include "hypoctrl/io.hpp"
#include "hypoctrl/lr_cost.hpp"
#include "hypoctrl/ou_semigroup.hpp"
#include "hypoctrl/phase_space.hpp"

// Command implementations behind the hypoctrl executable.
namespace hypoctrl::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode { ok = 0, compute_failure = 1, schema_violation = 2, unknown_preset = 3, io_failure = 4 };

struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct Context {
  config::RunConfig cfg;
  fs::path out;
  std::uint64_t seed = 1;
  std::vector<std::string> written;

  void json_file(const std::string& name, const json& j) {
    io::write_json(out / name, j);
    written.push_back(name);
  }
  void csv_file(const std::string& name, const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows) {
    io::write_csv(out / name, header, rows);
    written.push_back(name);
  }
};

namespace detail {

inline json symbol_json(const phase_space::QuadraticSymbol& q) {
  return {{"n", q.n()}, {"M_re", io::to_json(q.re())}, {"M_im", io::to_json(q.im())}};
}

inline json singular_json(const phase_space::SingularSpaceReport& r) {
  json j = {{"chain_dims", r.chain_dims},
            {"S_basis", io::to_json(Mat(r.S_basis.transpose()))},
            {"S_dim", r.S_basis.cols()},
            {"ill_conditioned", r.ill_conditioned},
            {"partially_elliptic", r.partially_elliptic},
            {"tolerance", r.tol}};
  if (r.k0) {
    j["k0"] = *r.k0;
    j["delta_loss"] = std::to_string(r.delta_loss->first) + "/" + std::to_string(r.delta_loss->second);
    j["delta_value"] = *r.delta_value();
  } else {
    j["k0"] = "none";
  }
  return j;
}

inline grid::GridFunction gaussian_grid(const config::RunConfig& c, int n) {
  const config::Numerics& m = c.numerics;
  std::vector<grid::Axis> axes(n, grid::Axis::from_box(m.grid_points, m.half_width));
  Vec center = Vec::Zero(n);
  double width = 1.0;
  if (c.f0) {
    if (!c.f0->center.empty()) {
      require(static_cast<int>(c.f0->center.size()) == n, "f0 center dimension differs from the problem",
              ErrorKind::schema_violation);
      center = config::to_vec(c.f0->center);
    }
    width = c.f0->width;
  }
  return grid::GridFunction::sample(axes, [&](const Vec& x) {
    return cplx(std::exp(-0.5 * (x - center).squaredNorm() / (width * width)));
  });
}

inline std::vector<double> logspace(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(hi / lo, i / (count - 1.0)));
  return out;
}

inline double min_eig(const Mat& m) {
  return Eigen::SelfAdjointEigenSolver<Mat>(linalg::symmetrize(m), Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace detail

inline void run_analyze(Context& ctx) {
  const config::RunConfig& c = ctx.cfg;
  const phase_space::QuadraticSymbol q = config::symbol(c);
  const phase_space::HamiltonMap h = phase_space::hamilton_map(q);
  json out;
  out["symbol"] = detail::symbol_json(q);
  out["hamilton_map"] = {{"ReF", io::to_json(h.ReF)}, {"ImF", io::to_json(h.ImF)}};
  out["singular_space"] = detail::singular_json(phase_space::singular_space(q, c.numerics.tolerance));
  out["accretive"] = detail::min_eig(q.re()) >= -1e-12 * std::max(1.0, linalg::max_abs(q.re()));
  if (c.preset == "chain") {
    const phase_space::ChainPreset ch = phase_space::chain_preset(config::chain_params(c));
    out["chain"] = {{"accretive_flag", ch.accretive_flag}, {"nondegeneracy", ch.nondegeneracy}};
  }
  if (const auto sys = config::ou_system(c)) {
    const phase_space::KalmanResult k = phase_space::kalman_analysis(*sys, c.numerics.tolerance);
    json ou = {{"Q", io::to_json(sys->Q())}, {"B", io::to_json(sys->B())}, {"kalman_rank", k.rank},
               {"stable", sys->stable_flag()}, {"near_threshold", k.near_threshold}};
    ou["kalman_k0"] = k.kalman_k0 ? json(*k.kalman_k0) : json("none");
    if (sys->stable_flag() && k.rank == sys->n()) {
      const phase_space::ConjugatedSymbols cs = phase_space::weighted_conjugation_symbols(*sys);
      ou["Q_inf"] = io::to_json(cs.Q_inf);
      ou["L_symbol"] = detail::symbol_json(cs.L_symbol);
      ou["L_singular_space"] = detail::singular_json(phase_space::singular_space(cs.L_symbol, c.numerics.tolerance));
    }
    const ou::HypoellipticityIndex hi = ou::hypoellipticity_index(*sys, 1.0, c.numerics.n_sphere, 16,
                                                                   static_cast<unsigned>(ctx.seed));
    ou["hypoellipticity"] = {{"hypoelliptic", hi.hypoelliptic}, {"k0", hi.k0}, {"c_hat", hi.c_hat}, {"t0_hat", hi.t0_hat}};
    out["ou"] = ou;
  }
  ctx.json_file("analyze.json", out);
}

inline void run_evolve(Context& ctx) {
  const config::RunConfig& c = ctx.cfg;
  const phase_space::OUSystem sys = *config::ou_system(c);
  const grid::GridFunction f0 = detail::gaussian_grid(c, sys.n());
  const std::vector<double> times = c.numerics.times.empty() ? std::vector<double>{0.05, 0.1} : c.numerics.times;
  json rows = json::array();
  io::write_grid(ctx.out / "evolve_f0", f0);
  ctx.written.push_back("evolve_f0.bin");
  for (std::size_t i = 0; i < times.size(); ++i) {
    ou::ApplyDiagnostics dk, df;
    const grid::GridFunction gk = ou::kolmogorov_apply(sys, f0, times[i], {}, &dk);
    const grid::GridFunction gf = ou::fourier_apply(sys, f0, times[i], false, {}, &df);
    const std::string stem = "evolve_t" + std::to_string(i);
    io::write_grid(ctx.out / (stem + "_kolmogorov"), gk);
    io::write_grid(ctx.out / (stem + "_fourier"), gf);
    ctx.written.push_back(stem + "_kolmogorov.bin");
    ctx.written.push_back(stem + "_fourier.bin");
    rows.push_back({{"t", times[i]},
                    {"l2_difference", grid::l2_distance(gk, gf)},
                    {"l2_norm", gk.l2_norm()},
                    {"max_escape", dk.max_escape},
                    {"aliasing_warning", df.aliasing_warning},
                    {"tail_fraction", df.tail_fraction}});
  }
  ctx.json_file("evolve.json", {{"n", sys.n()}, {"grid_points", c.numerics.grid_points},
                                {"half_width", c.numerics.half_width}, {"runs", rows}});
}

inline void run_dissipation(Context& ctx) {
  const config::RunConfig& c = ctx.cfg;
  const phase_space::OUSystem sys = *config::ou_system(c);
  const grid::GridFunction g0 = detail::gaussian_grid(c, sys.n());
  const std::vector<double> times = c.numerics.times.empty() ? detail::logspace(1e-3, 1e-1, 9) : c.numerics.times;
  const std::vector<double> cutoffs = c.numerics.cutoffs.empty() ? std::vector<double>{2, 4, 8} : c.numerics.cutoffs;
  const ou::DissipationProfile p = ou::frequency_dissipation_profile(sys, g0, times, cutoffs);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < p.times.size(); ++i)
    for (std::size_t k = 0; k < p.cutoffs.size(); ++k)
      rows.push_back({p.times[i], p.cutoffs[k], p.r[i][k], p.fitted_delta[i]});
  ctx.csv_file("dissipation.csv", {"t", "k", "r", "delta_hat"}, rows);
  const phase_space::KalmanResult k = phase_space::kalman_analysis(sys);
  json out = {{"exponent_fit", p.exponent_fit}, {"fit_residual_log10", p.fit_residual_log10},
              {"fit_rejected", p.fit_rejected}, {"c_hat", p.c_hat}, {"t0_hat", p.t0_hat},
              {"times", p.times}, {"delta_hat", p.fitted_delta}, {"measured_delta", p.measured_delta}};
  if (k.kalman_k0) {
    out["kalman_k0"] = *k.kalman_k0;
    out["target_exponent"] = 2 * *k.kalman_k0 + 1;
  } else {
    out["kalman_k0"] = "none";
  }
  ctx.json_file("dissipation.json", out);
}

inline std::vector<double> gs_times(const config::RunConfig& c) {
  return c.numerics.times.empty() ? std::vector<double>{0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6} : c.numerics.times;
}

inline json gelfand_shilov_json(const hermite::GelfandShilovProfile& gs) {
  return {{"exponent", gs.exponent}, {"target_exponent", gs.target_exponent}, {"fit_residual", gs.fit_residual},
          {"C0_hat", gs.C0_hat}, {"t0_hat", gs.t0_hat}, {"truncation_fraction", gs.truncation_fraction},
          {"truncation_warning", gs.truncation_warning}, {"k_min", gs.k_min}, {"k_max", gs.k_max}};
}

inline void run_spectral(Context& ctx) {
  const config::RunConfig& c = ctx.cfg;
  const hermite::RegionSpec region = config::region(*c.region);
  const hermite::HermiteTruncation tr(region.n, c.numerics.N);
  const hermite::GramMatrix gram = hermite::omega_gram(tr, region);
  std::vector<int> ks = c.numerics.k_list;
  if (ks.empty())
    for (int k = 0; k <= c.numerics.N; ++k) ks.push_back(k);
  const hermite::SpectralProfile sp = hermite::spectral_constant_profile(tr, gram, ks);
  std::vector<std::vector<double>> rows;
  for (const auto& e : sp.entries) rows.push_back({static_cast<double>(e.k), e.lambda_min, e.c_hat});
  ctx.csv_file("spectral.csv", {"k", "lambda_min", "c_hat"}, rows);
  io::write_matrix(ctx.out / "spectral_gram", gram.G.cast<cplx>());
  ctx.written.push_back("spectral_gram.bin");
  json out = {{"region", region.name()}, {"n", region.n}, {"N", c.numerics.N},
              {"exponent", sp.exponent}, {"coefficient", sp.coefficient}, {"fit_residual", sp.fit_residual},
              {"fitted_points", sp.fitted_points}, {"refinement_level", gram.refinement_level},
              {"refinement_change", gram.refinement_change}};
  if (const auto th = region.thickness()) out["thickness"] = {{"delta", th->first}, {"r", th->second}};
  else out["thickness"] = nullptr;

  if (c.preset || c.symbol || c.ou) {
    const phase_space::QuadraticSymbol q = config::symbol(c);
    require(q.n() == region.n, "problem and region dimensions differ", ErrorKind::schema_violation);
    const hermite::TruncatedOperator op = hermite::assemble_weyl(q, tr);
    const auto ss = phase_space::singular_space(q, c.numerics.tolerance);
    require(ss.k0.has_value(), "singular space is nontrivial; no Gelfand-Shilov exponent",
            ErrorKind::hypoellipticity_fails);
    const hermite::GelfandShilovProfile gs = hermite::gelfand_shilov_profile(op, gs_times(c), *ss.k0);
    std::vector<std::vector<double>> gr;
    for (const auto& row : gs.rows) gr.push_back({row.t, row.mu, row.delta_hat});
    ctx.csv_file("gelfand_shilov.csv", {"t", "mu", "delta_hat"}, gr);
    io::write_matrix(ctx.out / "operator", op.A());
    ctx.written.push_back("operator.bin");
    out["gelfand_shilov"] = gelfand_shilov_json(gs);
    out["accretive_flag"] = op.accretive_flag();
  }
  ctx.json_file("spectral.json", out);
}

inline json cost_json(const lr::CostReport& r) {
  static const char* names[3] = {"gamma / tau^{m/(b-a)} > 1", "tau/4 >= exp(-c1 (2 gamma)^a / tau^e)",
                                 "tau / c2^2 <= exp(c2 gamma^b / (2^m tau^e))"};
  const lr::LRParams& p = r.params;
  json samples = json::array();
  for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double T = f * r.T_tilde0;
    samples.push_back({{"T", T}, {"log_cost", r.log_cost(T)}, {"cost", r.cost(T)}});
  }
  return {{"params", {{"c1", p.c1}, {"c2", p.c2}, {"a", p.a}, {"b", p.b}, {"m", p.m}, {"t0", p.t0}}},
          {"q", r.q},
          {"exponent", r.exponent},
          {"gamma_half", r.gm.gamma},
          {"log_gamma_half", r.gm.log_gamma},
          {"M_half", r.gm.M},
          {"log_M_half", r.gm.log_M},
          {"relation_gamma_residual", r.gm.relation_residual},
          {"tau0_prime", r.tau0_prime},
          {"tau0_binding", r.tau.binding < 0 ? json("t0") : json(names[r.tau.binding])},
          {"tau0_thresholds", {r.tau.thresholds[0], r.tau.thresholds[1], r.tau.thresholds[2]}},
          {"T_tilde0", r.T_tilde0},
          {"C1", r.C1()},
          {"log_C1", r.log_C1},
          {"C2", r.C2()},
          {"log_C2", r.log_C2},
          {"C", r.C()},
          {"log_C", r.log_C},
          {"cost_samples", samples}};
}

inline void run_cost(Context& ctx) {
  const config::RunConfig& c = ctx.cfg;
  const lr::LRParams p = *c.params;
  const lr::CostReport r = lr::observability_cost(p);
  json out = cost_json(r);
  if (p.m >= 1.0 && p.c2 <= 1.0) {
    const auto model = lr::DiagonalSemigroupModel::hypothesis_exact(p, c.numerics.modes);
    const double T = 0.5 * r.T_tilde0;
    const lr::TelescopingTrace tr = lr::telescoping_trace(p, T, model, ctx.seed);
    std::vector<std::vector<double>> rows;
    for (const auto& s : tr.steps)
      rows.push_back({static_cast<double>(s.index), s.T_k, s.tau_k, s.mode_k, s.residual});
    ctx.csv_file("cost_trace.csv", {"k", "T_k", "tau_k", "mode_k", "residual"}, rows);
    out["trace"] = {{"T", T}, {"modes", model.modes()}, {"steps", tr.steps.size()},
                    {"first_failure", tr.first_failure}, {"final_bound_holds", tr.final_bound_holds},
                    {"states", tr.states}, {"worst_final_margin", tr.worst_final_margin}, {"pass", tr.pass}};
  } else {
    out["trace"] = nullptr;
    log(LogLevel::info, "telescoping trace skipped: synthetic model needs m >= 1 and c2 <= 1");
  }
  ctx.json_file("cost.json", out);
}

inline void run_control(Context& ctx) {
  const config::RunConfig& c = ctx.cfg;
  const phase_space::QuadraticSymbol q = config::symbol(c);
  const hermite::RegionSpec region = config::region(*c.region);
  require(q.n() == region.n, "problem and region dimensions differ", ErrorKind::schema_violation);
  const hermite::HermiteTruncation tr(q.n(), c.numerics.N);
  const hermite::TruncatedOperator op = hermite::assemble_weyl(q, tr);
  if (!op.accretive_flag()) log(LogLevel::warn, "truncated operator is not accretive");
  Vec center = Vec::Zero(q.n());
  center(0) = 0.5;
  double width = 1.0;
  if (c.f0) {
    if (!c.f0->center.empty()) {
      require(static_cast<int>(c.f0->center.size()) == q.n(), "f0 center dimension differs from the problem",
              ErrorKind::schema_violation);
      center = config::to_vec(c.f0->center);
    }
    width = c.f0->width;
  }
  CVec f0 = hermite::hermite_coefficients(
      tr, [&](const Vec& x) { return cplx(std::exp(-0.5 * (x - center).squaredNorm() / (width * width))); },
      std::max(10.0, std::abs(center.maxCoeff()) + 10.0 * width), 32, 12);
  f0 /= f0.norm();
  const control::ControlProblem cp = control::hermite_problem(op, region, c.numerics.T, c.numerics.nt, f0);
  const control::GramianReport rep = control::observability_gramian(cp, ctx.seed);
  const control::ControlResult res = control::hum_control(cp, rep, c.numerics.eps > 0 ? c.numerics.eps : -1.0,
                                                          c.numerics.refine);
  std::vector<std::vector<double>> rows;
  for (std::size_t j = 0; j < res.times.size(); ++j)
    rows.push_back({res.times[j], res.state_norms[j], res.control_norms[j]});
  ctx.csv_file("control.csv", {"t", "state_norm", "control_norm"}, rows);
  if (c.numerics.dump_gramian) {
    io::write_matrix(ctx.out / "gramian", rep.G_T);
    ctx.written.push_back("gramian.bin");
  }
  json out = {{"region", region.name()}, {"N", c.numerics.N}, {"D", cp.size()}, {"T", cp.T}, {"nt", cp.nt},
              {"lambda_min", rep.lambda_min}, {"observability_cost_hat", rep.observability_cost_hat},
              {"sampled_cost_hat", rep.sampled_cost_hat}, {"eps", res.eps},
              {"terminal_residual", res.terminal_residual},
              {"discrete_terminal_residual", res.discrete_terminal_residual},
              {"control_energy", res.control_energy}, {"dual_energy", res.dual_energy},
              {"duality_gap", res.duality_gap}, {"solve_residual", res.solve_residual}, {"refine", res.refine},
              {"accretive_flag", op.accretive_flag()}};
  if (c.numerics.verify) {
    json v;
    const auto ss = phase_space::singular_space(q, c.numerics.tolerance);
    std::vector<int> ks;
    for (int k = 1; k <= c.numerics.N; ++k) ks.push_back(k);
    const hermite::SpectralProfile sp =
        hermite::spectral_constant_profile(tr, hermite::omega_gram(tr, region), ks);
    std::optional<lr::LRParams> lp;
    if (ss.k0 && c.numerics.N >= 8) lp = control::measured_lr_params(sp, hermite::gelfand_shilov_profile(op, gs_times(c), *ss.k0));
    if (!lp) {
      v["status"] = "measured constants outside the LR hypotheses";
    } else {
      v["params"] = {{"c1", lp->c1}, {"c2", lp->c2}, {"a", lp->a}, {"b", lp->b}, {"m", lp->m}, {"t0", lp->t0}};
      try {
        const control::ObservabilityComparison cmp = control::verify_observability(rep, lr::observability_cost(*lp));
        v["status"] = cmp.holds ? "holds" : "violated";
        v["log_cost_hat"] = cmp.log_cost_hat;
        v["log_cost_theory"] = cmp.log_cost_theory;
      } catch (const Error& e) {
        v["status"] = e.what();
      }
    }
    out["verify"] = v;
  }
  ctx.json_file("control.json", out);
}

inline void run_chain(Context& ctx) {
  const config::RunConfig& c = ctx.cfg;
  const phase_space::ChainParams p = config::chain_params(c);
  const phase_space::ChainPreset ch = phase_space::chain_preset(p);
  const auto ss = phase_space::singular_space(ch.symbol, c.numerics.tolerance);
  ctx.json_file("chain.json",
                {{"params", {{"a", p.a}, {"b", p.b}, {"c", p.c}, {"alpha", p.alpha}, {"alpha1", p.alpha1}, {"alpha2", p.alpha2}}},
                 {"beta1", ch.beta1}, {"beta2", ch.beta2}, {"delta1", ch.delta1}, {"delta2", ch.delta2},
                 {"accretive_flag", ch.accretive_flag},
                 {"accretivity_threshold", 0.5 * std::max(p.alpha1, p.alpha2)},
                 {"nondegeneracy", ch.nondegeneracy},
                 {"singular_space", detail::singular_json(ss)}});
}

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::io_failure: return io_failure;
    case ErrorKind::schema_violation: return schema_violation;
    case ErrorKind::unknown_preset: return unknown_preset;
    default: return compute_failure;
  }
}

inline int run(const Options& opt, std::ostream& err = std::cerr) {
  std::string text;
  try {
    text = io::read_text(opt.config_path);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return io_failure;
  }
  const config::ParseResult pr = config::parse_config(text);
  if (!pr.config) {
    err << pr.summary();
    return pr.exit_code();
  }
  Context ctx;
  ctx.cfg = *pr.config;
  if (!opt.command.empty() && opt.command != ctx.cfg.command) {
    err << "/command: config says '" << ctx.cfg.command << "' but '" << opt.command << "' was requested\n";
    return schema_violation;
  }
  ctx.out = opt.out_dir;
  ctx.seed = opt.seed ? *opt.seed : ctx.cfg.seed.value_or(1);
  const int threads = opt.threads ? *opt.threads : ctx.cfg.threads.value_or(0);
  set_thread_cap(static_cast<unsigned>(std::max(0, threads)));
  try {
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec || !fs::is_directory(ctx.out)) throw Error(ErrorKind::io_failure, "cannot create " + ctx.out.string());
    const std::string& cmd = ctx.cfg.command;
    if (cmd == "analyze") run_analyze(ctx);
    else if (cmd == "evolve") run_evolve(ctx);
    else if (cmd == "dissipation") run_dissipation(ctx);
    else if (cmd == "spectral") run_spectral(ctx);
    else if (cmd == "cost") run_cost(ctx);
    else if (cmd == "control") run_control(ctx);
    else run_chain(ctx);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e.kind());
  }
  for (const std::string& f : ctx.written) log(LogLevel::info, "wrote " + (ctx.out / f).string());
  return ok;
}

}  // namespace hypoctrl::cli
