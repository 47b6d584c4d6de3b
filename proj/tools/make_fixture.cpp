#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "src/core/driver.hpp"
#include "src/core/panel_io.hpp"
#include "tools/fixture_dgp.hpp"

// Regenerates the bundled fixture and the golden report that documents the
// report format. Run from anywhere with the repo root as the argument:
//
//   make_fixture /path/to/repo
//
// Outputs: data/panel_fixture.csv (canonical draw, seed 7) and
// docs/report_golden.txt (fit-ame on that file, seed 11).

namespace {

void write(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    std::fprintf(stderr, "cannot write %s\n", path.c_str());
    std::exit(1);
  }
  f << content;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string root = argc > 1 ? argv[1] : ".";
  std::filesystem::create_directories(root + "/data");
  std::filesystem::create_directories(root + "/docs");

  const uhm::panel::Dataset d = uhm::fixture::draw(uhm::fixture::kN, 7);
  const std::string csv_path = root + "/data/panel_fixture.csv";
  write(csv_path, uhm::fixture::to_csv(d));
  std::printf("wrote %s (%d units x %d periods)\n", csv_path.c_str(), d.n,
              d.T);

  const std::string cfg_path = root + "/data/fixture_ame.cfg";
  write(cfg_path,
        "# mean of the second loading on the bundled fixture\n"
        "data = panel_fixture.csv\n"
        "c2 = 0; 1\n"
        "psi0 = -0.5\n"
        "seed = 11\n");
  std::printf("wrote %s\n", cfg_path.c_str());

  // The golden goes through the same config file the tests load, so the
  // documented bytes and the reproduction path cannot drift apart.
  const uhm::io::RunConfig cfg = uhm::io::parse_config(cfg_path);
  const uhm::driver::Report rep = uhm::driver::run("fit-ame", cfg);
  const std::string golden_path = root + "/docs/report_golden.txt";
  write(golden_path, rep.text());
  std::printf("wrote %s\n", golden_path.c_str());
  return 0;
}
