#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "src/core/driver.hpp"
#include "src/core/panel_io.hpp"
#include "tools/fixture_dgp.hpp"

using namespace uhm;

namespace {

const char* kPanelText =
    "unit_id,time,y,w_1,v_1,v_2\n"
    "u1,1,1.5,0.2,1,0\n"
    "u1,2,2.25,-0.4,1,1\n"
    "u1,3,0.5,0.0,1,1\n"
    "u2,1,-1.0,1.25,1,0\n"
    "u2,2,0.75,0.5,1,0\n"
    "u2,3,3.0,-2.0,1,1\n";

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  REQUIRE(f.good());
  f << content;
}

std::string tmp_path(const std::string& name) {
  return "/tmp/uhm_cli_io_" + name;
}

// Error-message check that fails loudly with the actual text.
void check_throws_with(const std::function<void()>& f,
                       const std::string& needle) {
  try {
    f();
    FAIL_CHECK("expected an exception mentioning '" << needle << "'");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find(needle) != std::string::npos,
                  "message '" << what << "' lacks '" << needle << "'");
  }
}

struct CliRun {
  int exit_code = 0;
  std::string out, err;
};

CliRun run_cli(const std::string& args) {
  const std::string out = tmp_path("stdout"), err = tmp_path("stderr");
  const std::string cmd =
      std::string(UHM_CLI_BIN) + " " + args + " >" + out + " 2>" + err;
  const int rc = std::system(cmd.c_str());
  CliRun r;
  r.exit_code = WEXITSTATUS(rc);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace

TEST_SUITE("cli_io") {
  TEST_CASE("panel round trip infers dimensions and places values") {
    const io::ParsedPanel pp = io::parse_panel_text(kPanelText, "mem");
    CHECK(pp.data.n == 2);
    CHECK(pp.data.T == 3);
    CHECK(pp.data.p == 1);
    CHECK(pp.data.q == 2);
    REQUIRE(pp.unit_ids.size() == 2);
    CHECK(pp.unit_ids[0] == "u1");
    CHECK(pp.unit_ids[1] == "u2");
    CHECK(pp.data.Y[0][1] == 2.25);
    CHECK(pp.data.W[1](0, 0) == 1.25);
    CHECK(pp.data.V[0](2, 1) == 1.0);
    CHECK(pp.data.V[1](1, 1) == 0.0);
  }

  TEST_CASE("whitespace delimiter gives the identical dataset") {
    std::string ws = kPanelText;
    for (char& c : ws)
      if (c == ',') c = ' ';
    const io::ParsedPanel a = io::parse_panel_text(kPanelText, "comma");
    const io::ParsedPanel b = io::parse_panel_text(ws, "space");
    REQUIRE(a.data.n == b.data.n);
    for (int i = 0; i < a.data.n; ++i) {
      CHECK(a.data.Y[i] == b.data.Y[i]);
      CHECK(a.data.W[i] == b.data.W[i]);
      CHECK(a.data.V[i] == b.data.V[i]);
    }
  }

  TEST_CASE("row order never matters") {
    // reverse the data rows, keep the header
    std::istringstream is(kPanelText);
    std::string header, line;
    std::getline(is, header);
    std::vector<std::string> rows;
    while (std::getline(is, line)) rows.push_back(line);
    std::string shuffled = header + "\n";
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
      shuffled += *it + "\n";

    const io::ParsedPanel a = io::parse_panel_text(kPanelText, "ordered");
    const io::ParsedPanel b = io::parse_panel_text(shuffled, "reversed");
    REQUIRE(a.unit_ids == b.unit_ids);
    for (int i = 0; i < a.data.n; ++i) {
      CHECK(a.data.Y[i] == b.data.Y[i]);
      CHECK(a.data.W[i] == b.data.W[i]);
      CHECK(a.data.V[i] == b.data.V[i]);
    }
  }

  TEST_CASE("schema violations are rejected with line numbers") {
    SUBCASE("duplicate unit-time") {
      const std::string bad =
          "unit_id,time,y,v_1\n"
          "u1,1,0.0,1\n"
          "u1,2,0.5,1\n"
          "u1,2,0.7,1\n";
      check_throws_with([&] { io::parse_panel_text(bad, "dup"); }, "dup:4");
      check_throws_with([&] { io::parse_panel_text(bad, "dup"); },
                        "duplicate time 2");
    }
    SUBCASE("ragged unit") {
      const std::string bad =
          "unit_id,time,y,v_1\n"
          "u1,1,0.0,1\nu1,2,0.1,1\n"
          "u2,1,0.2,1\n";
      check_throws_with([&] { io::parse_panel_text(bad, "rag"); },
                        "unit 'u2' has 1 rows, expected 2");
    }
    SUBCASE("non-numeric cell") {
      const std::string bad =
          "unit_id,time,y,v_1\n"
          "u1,1,zero,1\n";
      check_throws_with([&] { io::parse_panel_text(bad, "num"); },
                        "num:2 column y");
    }
    SUBCASE("inconsistent field count") {
      const std::string bad =
          "unit_id,time,y,v_1\n"
          "u1,1,0.0\n";
      check_throws_with([&] { io::parse_panel_text(bad, "width"); },
                        "expected 4 fields, got 3");
    }
    SUBCASE("empty cell") {
      const std::string bad =
          "unit_id,time,y,v_1\n"
          "u1,1,,1\n";
      check_throws_with([&] { io::parse_panel_text(bad, "cell"); },
                        "empty cell");
    }
    SUBCASE("time outside 1..T") {
      const std::string bad =
          "unit_id,time,y,v_1\n"
          "u1,0,0.0,1\nu1,1,0.1,1\n";
      check_throws_with([&] { io::parse_panel_text(bad, "time"); },
                        "needs times 1..2, found 0");
    }
    SUBCASE("header must open with unit_id, time, y") {
      check_throws_with(
          [&] { io::parse_panel_text("id,time,y,v_1\nu1,1,0,1\n", "h"); },
          "header must start");
    }
    SUBCASE("unknown header column") {
      check_throws_with(
          [&] {
            io::parse_panel_text("unit_id,time,y,v_1,x_1\nu1,1,0,1,2\n", "h");
          },
          "unexpected header column 'x_1'");
    }
    SUBCASE("w after v is out of order") {
      check_throws_with(
          [&] {
            io::parse_panel_text("unit_id,time,y,v_1,w_1\nu1,1,0,1,2\n", "h");
          },
          "unexpected header column 'w_1'");
    }
    SUBCASE("no loadings columns") {
      check_throws_with(
          [&] { io::parse_panel_text("unit_id,time,y,w_1\nu1,1,0,1\n", "h"); },
          "v_ column");
    }
  }

  TEST_CASE("config file parses every key and resolves paths") {
    const std::string mat_path = tmp_path("c1.txt");
    spit(mat_path, "1 0\n0 1\n");
    const std::string text =
        "# comment line\n"
        "data = panel.csv   # trailing comment\n"
        "out = report.txt\n"
        "target = ame\n"
        "c1 = " + mat_path + "\n"
        "c2 = 0; 1\n"
        "omega = 2 0; 0 2\n"
        "s2 = nonstationary\n"
        "psi0 = -0.5, 0.25\n"
        "zeta = 0.1\n"
        "folds = 5\n"
        "seed = 987654321\n"
        "threads = 2\n"
        "nu = 0.01\n"
        "nu_m = 0.02\n"
        "nu_b = 0.03\n"
        "lasso_c = 2.2\n"
        "lasso_gamma = 0.05\n"
        "lasso_refinements = 4\n"
        "lasso_tol = 1e-9\n"
        "lasso_max_iter = 500\n"
        "n = 300\n"
        "reps = 7\n"
        "beta0 = 1.5\n"
        "levels = 0.01, 0.05\n"
        "fd_grids = 9, 25\n"
        "deltas = -0.5, 0.45\n"
        "lambda = 0.2\n"
        "proj_nz = 400\n"
        "proj_nalpha = 50\n"
        "proj_ks = 8\n"
        "k = 6\n"
        "r = 0, 1\n"
        "r_dtheta = 0, 0\n"
        "radius = 0.75\n"
        "theta = 0.9\n"
        "mu_y = 0.1\n"
        "sigma_alpha_sq = 0.4\n";
    const io::RunConfig cfg = io::parse_config_text(text, "cfg", "/base");
    CHECK(*cfg.data == "/base/panel.csv");
    CHECK(*cfg.out == "/base/report.txt");
    CHECK(*cfg.target == "ame");
    CHECK(cfg.C1->isApprox(Eigen::MatrixXd::Identity(2, 2)));
    CHECK((*cfg.C2)(1, 0) == 1.0);
    CHECK((*cfg.Omega)(1, 1) == 2.0);
    CHECK(*cfg.s2_preset == "nonstationary");
    CHECK(cfg.psi0->size() == 2);
    CHECK((*cfg.psi0)[1] == 0.25);
    CHECK(cfg.zeta == 0.1);
    CHECK(cfg.folds == 5);
    CHECK(cfg.seed == 987654321ull);
    CHECK(cfg.threads == 2);
    CHECK(cfg.nu == 0.01);
    CHECK(cfg.nu_M == 0.02);
    CHECK(cfg.nu_B == 0.03);
    CHECK(cfg.lasso.c == 2.2);
    CHECK(cfg.lasso.gamma == 0.05);
    CHECK(cfg.lasso.refinements == 4);
    CHECK(cfg.lasso.cd_tol == 1e-9);
    CHECK(cfg.lasso.cd_max_iter == 500);
    CHECK(cfg.n == 300);
    CHECK(cfg.reps == 7);
    CHECK(cfg.beta0 == 1.5);
    CHECK(cfg.levels == std::vector<double>{0.01, 0.05});
    CHECK(cfg.fd_grids == std::vector<int>{9, 25});
    CHECK(*cfg.deltas == std::vector<double>{-0.5, 0.45});
    CHECK(cfg.lambda == 0.2);
    CHECK(cfg.proj.n_z == 400);
    CHECK(cfg.proj.n_alpha == 50);
    CHECK(cfg.proj.ks == 8);
    CHECK(cfg.K == 6);
    CHECK(cfg.tva_r->size() == 2);
    CHECK(cfg.tva_r_dtheta->size() == 2);
    CHECK(cfg.tva_radius == 0.75);
    CHECK(*cfg.theta == 0.9);
    CHECK(*cfg.mu_y == 0.1);
    CHECK(*cfg.sigma_alpha_sq == 0.4);
  }

  TEST_CASE("config rejections name the key and the line") {
    check_throws_with(
        [] { io::parse_config_text("zeta = 0.05\nwibble = 3\n", "c", ""); },
        "c:2: unknown config key 'wibble'");
    check_throws_with(
        [] { io::parse_config_text("zeta = 0.05\nzeta = 0.1\n", "c", ""); },
        "duplicate key 'zeta'");
    check_throws_with([] { io::parse_config_text("zeta 0.05\n", "c", ""); },
                      "expected key = value");
    check_throws_with([] { io::parse_config_text("zeta = 1.5\n", "c", ""); },
                      "(0, 1)");
    check_throws_with([] { io::parse_config_text("folds = 0\n", "c", ""); },
                      "at least 1");
    check_throws_with([] { io::parse_config_text("fd_grids = 10\n", "c", ""); },
                      "9, 25, or 49");
    check_throws_with([] { io::parse_config_text("target = gamma\n", "c", ""); },
                      "beta, ame, or variance");
    check_throws_with([] { io::parse_config_text("c1 = 1 2; 3\n", "c", ""); },
                      "ragged");
    check_throws_with(
        [] { io::parse_config_text("c1 = nosuchfile.mat\n", "c", ""); },
        "neither a matrix literal nor a readable file");
    check_throws_with([] { io::parse_config_text("seed = -4\n", "c", ""); },
                      "unsigned");
  }

  TEST_CASE("fd_grids none empties the comparison arms") {
    const io::RunConfig cfg =
        io::parse_config_text("fd_grids = none\n", "c", "");
    CHECK(cfg.fd_grids.empty());
  }

  TEST_CASE("driver rejects unknown commands listing the valid ones") {
    check_throws_with([] { driver::run("fit-gamma", io::RunConfig{}); },
                      "unknown command 'fit-gamma'");
    check_throws_with([] { driver::run("fit-gamma", io::RunConfig{}); },
                      "mc-power");
  }

  TEST_CASE("driver requires data for the estimation commands") {
    check_throws_with([] { driver::run("fit-beta", io::RunConfig{}); },
                      "requires a data file");
  }

  TEST_CASE("bundled golden report matches a fresh in-process run") {
    const io::RunConfig cfg =
        io::parse_config(std::string(UHM_SOURCE_DIR) +
                         "/data/fixture_ame.cfg");
    const driver::Report rep = driver::run("fit-ame", cfg);
    CHECK(rep.text() ==
          slurp(std::string(UHM_SOURCE_DIR) + "/docs/report_golden.txt"));
  }

  TEST_CASE("fit-ame fixture report: right fields, rank one, covering CI") {
    const io::RunConfig cfg =
        io::parse_config(std::string(UHM_SOURCE_DIR) +
                         "/data/fixture_ame.cfg");
    const driver::Report rep = driver::run("fit-ame", cfg);
    auto field = [&](const std::string& key) -> std::string {
      for (const auto& [k, v] : rep.fields)
        if (k == key) return v;
      FAIL("missing field " << key);
      return "";
    };
    CHECK(field("command") == "fit-ame");
    CHECK(field("n") == "200");
    CHECK(field("t") == "3");
    CHECK(field("q") == "2");
    CHECK(field("rank") == "1");
    CHECK(field("reject") == "false");
    const double est = std::stod(field("estimate"));
    CHECK(est == doctest::Approx(fixture::kMeanAlpha2).epsilon(0.2));
    const double lo = std::stod(field("ci_lo"));
    const double hi = std::stod(field("ci_hi"));
    CHECK(lo < fixture::kMeanAlpha2);
    CHECK(fixture::kMeanAlpha2 < hi);
  }

  TEST_CASE("cli reruns are byte-identical and reproduce the golden file") {
    const std::string cfg =
        std::string(UHM_SOURCE_DIR) + "/data/fixture_ame.cfg";
    const CliRun a = run_cli("fit-ame --config " + cfg);
    const CliRun b = run_cli("fit-ame --config " + cfg);
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out == slurp(std::string(UHM_SOURCE_DIR) +
                         "/docs/report_golden.txt"));
    // timings live on stderr, never in the report
    CHECK(a.err.find("timing:") != std::string::npos);
    CHECK(a.out.find("timing") == std::string::npos);
  }

  TEST_CASE("cli flags override config file settings") {
    const std::string cfg =
        std::string(UHM_SOURCE_DIR) + "/data/fixture_ame.cfg";
    const CliRun a = run_cli("fit-ame --config " + cfg + " --zeta 0.5");
    CHECK(a.exit_code == 0);
    CHECK(a.out.find("zeta: 0.5\n") != std::string::npos);
  }

  TEST_CASE("cli exit codes are the machine-readable categories") {
    const std::string cfg =
        std::string(UHM_SOURCE_DIR) + "/data/fixture_ame.cfg";
    SUBCASE("missing data file: io") {
      const CliRun r = run_cli("fit-ame --data /tmp/uhm_no_such_file.csv");
      CHECK(r.exit_code == 4);
      CHECK(r.err.find("UHM_ERR_IO") != std::string::npos);
    }
    SUBCASE("unknown config key: config, naming the key") {
      spit(tmp_path("bad.cfg"), "zeta = 0.05\nwibble = 3\n");
      const CliRun r =
          run_cli("fit-ame --config " + tmp_path("bad.cfg"));
      CHECK(r.exit_code == 2);
      CHECK(r.err.find("UHM_ERR_CONFIG") != std::string::npos);
      CHECK(r.err.find("wibble") != std::string::npos);
    }
    SUBCASE("malformed data: parse") {
      spit(tmp_path("bad.csv"), "unit_id,time,y,v_1\nu1,1,zero,1\n");
      const CliRun r = run_cli("fit-ame --data " + tmp_path("bad.csv"));
      CHECK(r.exit_code == 3);
      CHECK(r.err.find("UHM_ERR_PARSE") != std::string::npos);
    }
    SUBCASE("unknown command: argument") {
      const CliRun r = run_cli("fit-gamma --config " + cfg);
      CHECK(r.exit_code == 1);
    }
  }

  TEST_CASE("cli --out writes the report and table files, printing nothing") {
    spit(tmp_path("mc.cfg"),
         "reps = 2\nfd_grids = none\nproj_nz = 200\nproj_nalpha = 40\n");
    const std::string out = tmp_path("size_report.txt");
    const CliRun r = run_cli("mc-size --config " + tmp_path("mc.cfg") +
                             " --seed 5 --out " + out);
    CHECK(r.exit_code == 0);
    CHECK(r.out.empty());
    const std::string report = slurp(out);
    CHECK(report.find("command: mc-size") != std::string::npos);
    CHECK(report.find("failures: 0") != std::string::npos);
    const std::string table = slurp(out + ".size.csv");
    CHECK(table.rfind("arm,level,rate,mc_se,reps\n", 0) == 0);
    CHECK(table.find("lr,0.05,") != std::string::npos);

    const CliRun again = run_cli("mc-size --config " + tmp_path("mc.cfg") +
                                 " --seed 5 --out " + out);
    CHECK(again.exit_code == 0);
    CHECK(slurp(out) == report);
  }

  TEST_CASE("mc-size smoke through the driver carries ten-rep rates") {
    io::RunConfig cfg;
    cfg.reps = 10;
    cfg.fd_grids.clear();
    cfg.proj.n_z = 200;
    cfg.proj.n_alpha = 40;
    cfg.seed = 21;
    const driver::Report rep = driver::run("mc-size", cfg);
    REQUIRE(rep.tables.size() == 1);
    CHECK(rep.tables[0].first == "size");
    std::istringstream is(rep.tables[0].second);
    std::string line;
    std::getline(is, line);
    CHECK(line == "arm,level,rate,mc_se,reps");
    int rows = 0;
    while (std::getline(is, line)) {
      CHECK(line.find(",10") == line.size() - 3);
      ++rows;
    }
    CHECK(rows == 4);  // two arms x two levels
  }
}
