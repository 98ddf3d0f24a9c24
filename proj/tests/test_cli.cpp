#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "hypoctrl/cli.hpp"

using namespace hypoctrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hypoctrl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  io::write_text(p, text);
  return p;
}

int run_text(const std::string& name, const std::string& text, const std::string& command, fs::path* out_dir = nullptr,
             std::string* err_text = nullptr) {
  const fs::path dir = scratch(name);
  cli::Options opt;
  opt.command = command;
  opt.config_path = write_config(dir, text).string();
  opt.out_dir = (dir / "out").string();
  std::ostringstream err;
  const int code = cli::run(opt, err);
  if (out_dir) *out_dir = dir / "out";
  if (err_text) *err_text = err.str();
  return code;
}

io::json load(const fs::path& p) { return io::json::parse(io::read_text(p)); }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = io::read_text(e.path());
  return files;
}

bool has_pointer(const config::ParseResult& r, const std::string& pointer) {
  for (const auto& v : r.violations)
    if (v.pointer == pointer) return true;
  return false;
}

}  // namespace

TEST(ParseConfig, KfpAnalyzeExampleIsValid) {
  const config::ParseResult r = config::parse_config(R"({"command":"analyze","preset":"kfp","a":1.0})");
  ASSERT_TRUE(r.config) << r.summary();
  EXPECT_EQ(r.exit_code(), 0);
  EXPECT_EQ(*r.config->preset, "kfp");
  const phase_space::QuadraticSymbol q = config::symbol(*r.config);
  EXPECT_EQ(q.n(), 2);
  EXPECT_LT((q.re() - phase_space::kfp_symbol(1.0).re()).norm(), 1e-15);
  EXPECT_LT((q.im() - phase_space::kfp_symbol(1.0).im()).norm(), 1e-15);
}

TEST(ParseConfig, MissingCommandPointsAtCommand) {
  const config::ParseResult r = config::parse_config(R"({"preset":"kfp","a":1.0})");
  EXPECT_FALSE(r.config);
  EXPECT_EQ(r.exit_code(), 2);
  EXPECT_TRUE(has_pointer(r, "/command")) << r.summary();
}

TEST(ParseConfig, CostExampleIsValid) {
  const config::ParseResult r =
      config::parse_config(R"({"command":"cost","params":{"a":0.5,"b":1.0,"m":3,"c1":1,"c2":0.5,"t0":1}})");
  ASSERT_TRUE(r.config) << r.summary();
  EXPECT_EQ(r.config->params->exponent(), 3.0);
}

TEST(ParseConfig, UnknownKeysAreRejectedWithPointers) {
  const config::ParseResult r = config::parse_config(
      R"({"command":"analyze","preset":"kfp","colour":1,"numerics":{"N":8,"Nt":3},"region":{"kind":"whole_space","x":0}})");
  EXPECT_EQ(r.exit_code(), 2);
  EXPECT_TRUE(has_pointer(r, "/colour"));
  EXPECT_TRUE(has_pointer(r, "/numerics/Nt"));
  EXPECT_TRUE(has_pointer(r, "/region/x"));
}

TEST(ParseConfig, RangeAndTypeViolations) {
  EXPECT_TRUE(has_pointer(config::parse_config(R"({"command":"analyze","preset":"heat","n":0})"), "/n"));
  EXPECT_TRUE(has_pointer(config::parse_config(R"({"command":"analyze","preset":"kfp","a":"one"})"), "/a"));
  EXPECT_TRUE(has_pointer(config::parse_config(R"({"command":"bake","preset":"kfp"})"), "/command"));
  EXPECT_TRUE(has_pointer(
      config::parse_config(R"({"command":"cost","params":{"a":1.0,"b":1.0,"m":3,"c1":1,"c2":0.5,"t0":1}})"),
      "/params/b"));
  EXPECT_TRUE(has_pointer(config::parse_config(R"({"command":"control","preset":"kfp"})"), "/region"));
  EXPECT_EQ(config::parse_config("{not json").exit_code(), 2);
  EXPECT_EQ(config::parse_config("[1,2]").exit_code(), 2);
}

TEST(ParseConfig, UnknownPresetIsDistinguished) {
  const config::ParseResult r = config::parse_config(R"({"command":"analyze","preset":"kfp2"})");
  EXPECT_TRUE(r.unknown_preset);
  EXPECT_EQ(r.exit_code(), 3);
}

TEST(ParseConfig, EveryPresetParsesAndBuilds) {
  for (const std::string& p : config::presets()) {
    const std::string text = p == "chain"
        ? R"({"command":"analyze","preset":"chain","chain":{"a":0.3,"b":0.7,"c":0.2,"alpha":2,"alpha1":1,"alpha2":1.5}})"
        : R"({"command":"analyze","preset":")" + p + R"(","n":2})";
    const config::ParseResult r = config::parse_config(text);
    ASSERT_TRUE(r.config) << p << ": " << r.summary();
    EXPECT_GT(config::symbol(*r.config).n(), 0) << p;
  }
}

TEST(ParseConfig, RoundTrip) {
  const std::vector<std::string> docs = {
      R"({"command":"analyze","preset":"kfp","a":1.0})",
      R"({"command":"cost","params":{"a":0.5,"b":1.0,"m":3,"c1":1,"c2":0.5,"t0":1},"seed":7})",
      R"({"command":"control","preset":"kfp","a":0.3,
          "region":{"kind":"union_of_balls","n":2,"centers":[[1,0],[-1,0.5]],"radii":[0.5,0.25]},
          "numerics":{"N":12,"T":0.7,"nt":64,"eps":1e-9,"dump_gramian":true,"verify":true},
          "f0":{"center":[0.5,0.1],"width":0.8},"threads":2})",
      R"({"command":"evolve","ou":{"Q":[[1,0],[0,0]],"B":[[-1,1],[0,-1]]},
          "numerics":{"grid_points":64,"half_width":6.5,"times":[0.1,0.3]}})",
      R"({"command":"spectral","region":{"kind":"half_space","n":1,"normal":[1],"offset":0.1234567890123},
          "numerics":{"k_list":[1,2,3,5,8]}})",
      R"({"command":"chain","preset":"chain","chain":{"a":0.3,"b":0.7,"c":0.2,"alpha":2,"alpha1":1,"alpha2":1.5}})",
      R"({"command":"analyze","symbol":{"n":1,"M_re":[[1,0],[0,0]],"M_im":[[0,0.5],[0.5,0]]}})",
  };
  for (const std::string& d : docs) {
    const config::ParseResult r = config::parse_config(d);
    ASSERT_TRUE(r.config) << d << "\n" << r.summary();
    const std::string text = io::to_text(config::to_json(*r.config));
    const config::ParseResult again = config::parse_config(text);
    ASSERT_TRUE(again.config) << text << "\n" << again.summary();
    EXPECT_TRUE(*again.config == *r.config) << text;
    EXPECT_EQ(io::to_text(config::to_json(*again.config)), text);
  }
}

TEST(ParseConfig, RandomCostParamsRoundTripBitExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double a = u(rng);
    const double b = a + u(rng);
    io::json doc = {{"command", "cost"},
                    {"params", {{"a", a}, {"b", b}, {"m", u(rng)}, {"c1", u(rng)}, {"c2", u(rng)}, {"t0", u(rng)}}}};
    const config::ParseResult r = config::parse_config(io::to_text(doc));
    ASSERT_TRUE(r.config) << r.summary();
    EXPECT_EQ(r.config->params->a, a);
    EXPECT_EQ(r.config->params->b, b);
    const config::ParseResult again = config::parse_config(io::to_text(config::to_json(*r.config)));
    ASSERT_TRUE(again.config);
    EXPECT_TRUE(*again.config == *r.config);
  }
}

TEST(Emit, TextIsSortedAndFullPrecision) {
  const io::json j = {{"zeta", 0.1}, {"alpha", {1.0 / 3.0, 2}}, {"mid", std::nan("")}, {"big", INFINITY}};
  const std::string t = io::to_text(j);
  EXPECT_LT(t.find("\"alpha\""), t.find("\"big\""));
  EXPECT_LT(t.find("\"big\""), t.find("\"mid\""));
  EXPECT_LT(t.find("\"mid\""), t.find("\"zeta\""));
  EXPECT_NE(t.find("0.33333333333333331"), std::string::npos);
  EXPECT_NE(t.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(t.find("\"nan\""), std::string::npos);
  EXPECT_NE(t.find("\"inf\""), std::string::npos);
  EXPECT_TRUE(io::json::accept(t));
}

TEST(Emit, CsvHasHeaderRow) {
  const fs::path dir = scratch("csv");
  io::write_csv(dir / "a.csv", {"t", "x"}, {{0.5, 1.0}, {1.0, 0.25}});
  EXPECT_EQ(io::read_text(dir / "a.csv"), "t,x\n0.5,1\n1,0.25\n");
  EXPECT_THROW(io::write_csv(dir / "b.csv", {"t", "x"}, {{0.5}}), Error);
}

TEST(Emit, MatrixBinaryRoundTrip) {
  const fs::path dir = scratch("bin");
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  CMat m(7, 5);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = cplx(g(rng), g(rng));
  io::write_matrix(dir / "m", m);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 7u * 5u * 16u);
  const CMat back = io::read_matrix(dir / "m");
  ASSERT_EQ(back.rows(), 7);
  ASSERT_EQ(back.cols(), 5);
  EXPECT_EQ((back - m).cwiseAbs().maxCoeff(), 0.0);
  const io::json side = load(dir / "m.json");
  EXPECT_EQ(side["layout"], "row-major");
  EXPECT_EQ(side["dtype"], "complex128-le");
}

TEST(Emit, GridBinaryRoundTrip) {
  const fs::path dir = scratch("grid");
  const std::vector<grid::Axis> axes = {grid::Axis(8, 0.5, 0.25), grid::Axis(6, 0.3, -1.0)};
  const grid::GridFunction f =
      grid::GridFunction::sample(axes, [](const Vec& x) { return cplx(std::exp(-x.squaredNorm()), x(0) * x(1)); });
  io::write_grid(dir / "g", f);
  const grid::GridFunction back = io::read_grid(dir / "g");
  ASSERT_EQ(back.size(), f.size());
  EXPECT_EQ(back.axes()[1].points, 6);
  EXPECT_EQ(back.axes()[0].center, 0.25);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(back.values()[i], f.values()[i]);
}

TEST(Emit, MissingBinaryIsIoFailure) {
  try {
    (void)io::read_matrix(scratch("missing") / "nothing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io_failure);
  }
}

TEST(Run, KfpAnalyzeReportsK0One) {
  fs::path out;
  ASSERT_EQ(run_text("analyze", R"({"command":"analyze","preset":"kfp","a":1.0})", "analyze", &out), 0);
  const io::json j = load(out / "analyze.json");
  EXPECT_EQ(j["singular_space"]["k0"], 1);
  EXPECT_EQ(j["singular_space"]["S_dim"], 0);
  EXPECT_EQ(j["singular_space"]["delta_loss"], "2/3");
  EXPECT_EQ(j["accretive"], true);
}

TEST(Run, KolmogorovAnalyzeIncludesOuBlock) {
  fs::path out;
  ASSERT_EQ(run_text("analyze_ou", R"({"command":"analyze","ou":{"Q":[[0,0],[0,1]],"B":[[-1,1],[0,-1]]}})", "analyze",
                     &out),
            0);
  const io::json j = load(out / "analyze.json");
  EXPECT_EQ(j["ou"]["kalman_rank"], 2);
  EXPECT_EQ(j["ou"]["kalman_k0"], 1);
  EXPECT_EQ(j["ou"]["stable"], true);
  EXPECT_EQ(j["ou"]["L_singular_space"]["k0"], 1);
  EXPECT_TRUE(j["ou"]["hypoellipticity"]["hypoelliptic"].get<bool>());
}

TEST(Run, CostExampleHasExponentThree) {
  fs::path out;
  ASSERT_EQ(run_text("cost",
                     R"({"command":"cost","params":{"a":0.5,"b":1.0,"m":3,"c1":1,"c2":0.5,"t0":1}})", "cost", &out),
            0);
  const io::json j = load(out / "cost.json");
  EXPECT_EQ(j["exponent"], 3);
  EXPECT_TRUE(j["trace"]["pass"].get<bool>());
  const std::string csv = io::read_text(out / "cost_trace.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,T_k,tau_k,mode_k,residual");
}

TEST(Run, WorkedExampleCostConstants) {
  fs::path out;
  ASSERT_EQ(run_text("cost_worked", R"({"command":"cost","params":{"a":0.5,"b":1,"m":1,"c1":1,"c2":1,"t0":1}})", "cost",
                     &out),
            0);
  const io::json j = load(out / "cost.json");
  EXPECT_NEAR(j["gamma_half"].get<double>(), 288.0, 1e-9);
  EXPECT_NEAR(j["M_half"].get<double>(), 72.0, 1e-9);
  EXPECT_TRUE(j["tau0_binding"].is_string());
}

TEST(Run, ChainReportsKernelDims) {
  fs::path out;
  ASSERT_EQ(run_text("chain",
                     R"({"command":"chain","preset":"chain","chain":{"a":0.3,"b":0.7,"c":0.2,"alpha":2,"alpha1":1,"alpha2":1.5}})",
                     "chain", &out),
            0);
  const io::json j = load(out / "chain.json");
  const std::vector<int> dims = j["singular_space"]["chain_dims"];
  ASSERT_GE(dims.size(), 3u);
  EXPECT_EQ(dims[0], 8);
  EXPECT_EQ(dims[1], 4);
  EXPECT_EQ(dims[2], 0);
  EXPECT_EQ(j["accretive_flag"], true);
}

TEST(Run, SpectralAndGelfandShilovFiles) {
  fs::path out;
  ASSERT_EQ(run_text("spectral",
                     R"({"command":"spectral","preset":"harmonic","n":1,
                         "region":{"kind":"complement_of_ball","n":1,"center":[0],"radius":1},
                         "numerics":{"N":12,"times":[0.2,0.4,0.6]}})",
                     "spectral", &out),
            0);
  EXPECT_TRUE(fs::exists(out / "spectral.csv"));
  EXPECT_TRUE(fs::exists(out / "gelfand_shilov.csv"));
  const CMat g = io::read_matrix(out / "spectral_gram");
  EXPECT_EQ(g.rows(), 13);
  EXPECT_LT((g - g.adjoint()).norm(), 1e-12);
}

TEST(Run, EvolveRepresentationsAgree) {
  fs::path out;
  ASSERT_EQ(run_text("evolve", R"({"command":"evolve","preset":"kolmogorov","n":1,
                                   "numerics":{"grid_points":128,"half_width":8,"times":[0.1]}})",
                     "evolve", &out),
            0);
  const io::json j = load(out / "evolve.json");
  EXPECT_LT(j["runs"][0]["l2_difference"].get<double>() / j["runs"][0]["l2_norm"].get<double>(), 1e-6);
  const grid::GridFunction g = io::read_grid(out / "evolve_t0_fourier");
  EXPECT_EQ(g.size(), 128u * 128u);
}

TEST(Run, DissipationWritesCsv) {
  fs::path out;
  ASSERT_EQ(run_text("dissipation", R"({"command":"dissipation","preset":"heat","n":1,
                                        "numerics":{"grid_points":128,"half_width":10}})",
                     "dissipation", &out),
            0);
  const io::json j = load(out / "dissipation.json");
  EXPECT_NEAR(j["exponent_fit"].get<double>(), 1.0, 0.05);
  const std::string csv = io::read_text(out / "dissipation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,k,r,delta_hat");
}

TEST(Run, ControlWritesSeriesAndGramian) {
  fs::path out;
  ASSERT_EQ(run_text("control", R"({"command":"control","preset":"heat","n":1,
                                    "region":{"kind":"complement_of_ball","n":1,"center":[0],"radius":1},
                                    "numerics":{"N":10,"nt":64,"dump_gramian":true}})",
                     "control", &out),
            0);
  const io::json j = load(out / "control.json");
  EXPECT_LT(j["terminal_residual"].get<double>(), 1e-2);
  EXPECT_LT(j["duality_gap"].get<double>(), 0.05);
  const CMat g = io::read_matrix(out / "gramian");
  EXPECT_EQ(g.rows(), 11);
  const std::string csv = io::read_text(out / "control.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,state_norm,control_norm");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 66);
}

TEST(Run, ExitCodes) {
  std::string err;
  EXPECT_EQ(run_text("x_schema", R"({"preset":"kfp"})", "analyze", nullptr, &err), 2);
  EXPECT_NE(err.find("/command"), std::string::npos);
  EXPECT_EQ(run_text("x_preset", R"({"command":"analyze","preset":"nope"})", "analyze"), 3);
  EXPECT_EQ(run_text("x_mismatch", R"({"command":"analyze","preset":"kfp"})", "cost"), 2);
  EXPECT_EQ(run_text("x_numeric", R"({"command":"spectral","preset":"kfp","region":{"kind":"whole_space","n":1}})",
                     "spectral"),
            2);

  cli::Options opt;
  opt.command = "analyze";
  opt.config_path = (scratch("x_io") / "absent.json").string();
  std::ostringstream sink;
  EXPECT_EQ(cli::run(opt, sink), 4);

  const fs::path dir = scratch("x_out");
  opt.config_path = write_config(dir, R"({"command":"analyze","preset":"kfp"})").string();
  io::write_text(dir / "blocker", "a file where the output directory should go");
  opt.out_dir = (dir / "blocker").string();
  EXPECT_EQ(cli::run(opt, sink), 4);
}

TEST(Run, IdenticalRunsGiveIdenticalBytes) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"analyze", R"({"command":"analyze","ou":{"Q":[[0,0],[0,1]],"B":[[-1,1],[0,-1]]},"numerics":{"n_sphere":100}})"},
      {"cost", R"({"command":"cost","params":{"a":1,"b":2,"m":1,"c1":1,"c2":1,"t0":1},"numerics":{"modes":256}})"},
      {"control", R"({"command":"control","preset":"harmonic","n":1,
                      "region":{"kind":"complement_of_ball","n":1,"center":[0],"radius":1},
                      "numerics":{"N":8,"nt":32,"dump_gramian":true}})"},
  };
  for (const auto& [cmd, text] : cases) {
    fs::path a, b;
    ASSERT_EQ(run_text("det_a_" + cmd, text, cmd, &a), 0);
    ASSERT_EQ(run_text("det_b_" + cmd, text, cmd, &b), 0);
    const auto sa = snapshot(a), sb = snapshot(b);
    EXPECT_FALSE(sa.empty());
    EXPECT_TRUE(sa == sb) << cmd;
  }
}

TEST(Run, ThreadCapDoesNotChangeOutput) {
  const std::string text = R"({"command":"control","preset":"heat","n":1,
                               "region":{"kind":"complement_of_ball","n":1,"center":[0],"radius":1},
                               "numerics":{"N":8,"nt":32}})";
  const fs::path dir = scratch("threads");
  cli::Options opt;
  opt.command = "control";
  opt.config_path = write_config(dir, text).string();
  std::ostringstream sink;
  opt.out_dir = (dir / "one").string();
  opt.threads = 1;
  ASSERT_EQ(cli::run(opt, sink), 0);
  opt.out_dir = (dir / "four").string();
  opt.threads = 4;
  ASSERT_EQ(cli::run(opt, sink), 0);
  set_thread_cap(0);
  EXPECT_TRUE(snapshot(dir / "one") == snapshot(dir / "four"));
}

#ifdef HYPOCTRL_BIN
TEST(Binary, ExitCodesFromTheExecutable) {
  const fs::path dir = scratch("binary");
  const std::string bin = HYPOCTRL_BIN;
  auto call = [&](const std::string& args) {
    const int status = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const fs::path good = write_config(dir, R"({"command":"chain","preset":"chain",
      "chain":{"a":0.3,"b":0.7,"c":0.2,"alpha":2,"alpha1":1,"alpha2":1.5}})");
  EXPECT_EQ(call("chain --config " + good.string() + " --out " + (dir / "out").string() + " --seed 3 --threads 1"), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "chain.json"));
  EXPECT_EQ(call("chain --config " + (dir / "absent.json").string()), 4);
  EXPECT_EQ(call("bake --config " + good.string()), 2);
  EXPECT_EQ(call("chain"), 2);
  io::write_text(dir / "bad.json", R"({"command":"chain","preset":"chains"})");
  EXPECT_EQ(call("chain --config " + (dir / "bad.json").string()), 3);
}
#endif
