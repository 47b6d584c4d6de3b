#ifndef UHMOM_PANEL_IO_HPP
#define UHMOM_PANEL_IO_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/lasso.hpp"
#include "core/mc_harness.hpp"
#include "core/panel_moments.hpp"

// File-facing surface: the long-format panel reader, a small numeric table
// reader for the cross-sectional commands, and the flat key = value run
// configuration. All parse failures carry the source name and line number.

namespace uhm::io {

// Malformed data file (schema violations, bad cells).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Malformed or inconsistent configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Filesystem failures (missing file, unreadable path).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path);

struct ParsedPanel {
  panel::Dataset data;
  std::vector<std::string> unit_ids;  // sorted, parallel to data rows
};

// Long-format panel text: mandatory header unit_id, time, y, w_1..w_p,
// v_1..v_q; one row per unit-time; comma or whitespace delimited. Units are
// sorted by id and rows by time on the way in, so row order in the file
// never matters. Every violation names the offending line.
ParsedPanel parse_panel_text(const std::string& text, const std::string& name);
ParsedPanel parse_panel(const std::string& path);

// Plain numeric table whose header must match `columns` exactly. Used for
// the two-measurement and deconvolution samples.
Eigen::MatrixXd parse_table_text(const std::string& text,
                                 const std::string& name,
                                 const std::vector<std::string>& columns);
Eigen::MatrixXd parse_table(const std::string& path,
                            const std::vector<std::string>& columns);

// Matrix literal: rows split on ';' (or newlines when read from a file),
// entries on commas or whitespace.
Eigen::MatrixXd parse_matrix_text(const std::string& text,
                                  const std::string& context);
Eigen::VectorXd parse_vector_text(const std::string& text,
                                  const std::string& context);

struct RunConfig {
  std::optional<std::string> data;  // input file path
  std::optional<std::string> out;   // report destination
  std::optional<std::string> target;  // beta | ame | variance

  // Panel target pieces. Matrices may be inline or a file path; s2 also
  // accepts the presets "iid" and "nonstationary" which need T to expand.
  std::optional<Eigen::MatrixXd> C1, C2, Omega, S2;
  std::optional<std::string> s2_preset;
  std::optional<Eigen::VectorXd> psi0;

  double zeta = 0.05;
  int folds = 4;
  std::uint64_t seed = 1;
  int threads = 1;
  double nu = -1.0;  // score-test truncation; negative = default rule
  double nu_M = 0.0, nu_B = 0.0;
  lasso::Config lasso;

  // Simulation commands.
  int n = 250;
  int reps = 100;
  double beta0 = 1.0;
  std::vector<double> levels{0.05, 0.10};
  std::vector<int> fd_grids{9, 25, 49};
  std::optional<std::vector<double>> deltas;
  mc::ProjectionConfig proj;
  double lambda = -1.0;

  int K = 4;  // two-measurement moment count

  // Deconvolution functional command.
  std::optional<Eigen::VectorXd> tva_r;
  std::optional<Eigen::VectorXd> tva_r_dtheta;
  double tva_radius = 0.5;
  std::optional<double> theta;
  std::optional<double> mu_y;
  std::optional<double> sigma_alpha_sq;
};

// Applies one key = value assignment. base_dir resolves relative paths in
// values; context labels errors (file:line or flag name). Unknown keys are
// rejected here, so the accepted vocabulary lives in one place.
void set_config_key(RunConfig& cfg, const std::string& key,
                    const std::string& value, const std::string& base_dir,
                    const std::string& context);

// key = value lines, '#' comments, blank lines ignored, duplicates rejected.
RunConfig parse_config_text(const std::string& text, const std::string& name,
                            const std::string& base_dir);
RunConfig parse_config(const std::string& path);

}  // namespace uhm::io

#endif
