#include "core/panel_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace uhm::io {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// Comma-delimited when the header has commas, otherwise whitespace. Mixed
// files fail naturally: a comma row under a whitespace header parses as one
// giant field and trips the count check.
std::vector<std::string> split_fields(const std::string& line, bool comma) {
  if (!comma) return split_ws(line);
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_real_or_throw(const std::string& tok, const std::string& where) {
  const std::string t = trim(tok);
  if (t.empty()) throw ParseError(where + ": empty cell");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ParseError(where + ": not a finite number: '" + t + "'");
  return v;
}

long parse_int_or_throw(const std::string& tok, const std::string& where) {
  const std::string t = trim(tok);
  if (t.empty()) throw ParseError(where + ": empty cell");
  long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw ParseError(where + ": not an integer: '" + t + "'");
  return v;
}

struct Line {
  int number = 0;
  std::string text;
};

// Non-blank lines with their 1-based positions.
std::vector<Line> physical_lines(const std::string& text) {
  std::vector<Line> out;
  int number = 0;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur)) {
    ++number;
    if (!trim(cur).empty()) out.push_back({number, cur});
  }
  return out;
}

std::string at(const std::string& name, int line) {
  return name + ":" + std::to_string(line);
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

ParsedPanel parse_panel_text(const std::string& text, const std::string& name) {
  const auto lines = physical_lines(text);
  if (lines.empty()) throw ParseError(name + ": empty file, header expected");

  const bool comma = lines[0].text.find(',') != std::string::npos;
  const auto header = split_fields(lines[0].text, comma);
  const std::string hat = at(name, lines[0].number);
  if (header.size() < 3 || header[0] != "unit_id" || header[1] != "time" ||
      header[2] != "y")
    throw ParseError(hat + ": header must start with unit_id, time, y");

  int p = 0, q = 0;
  for (std::size_t j = 3; j < header.size(); ++j) {
    const std::string& h = header[j];
    if (q == 0 && h == "w_" + std::to_string(p + 1)) {
      ++p;
    } else if (h == "v_" + std::to_string(q + 1)) {
      ++q;
    } else {
      throw ParseError(hat + ": unexpected header column '" + h +
                       "' (want w_1..w_p then v_1..v_q in order)");
    }
  }
  if (q == 0) throw ParseError(hat + ": at least one v_ column is required");
  const std::size_t width = 3 + std::size_t(p) + std::size_t(q);

  struct Row {
    int line = 0, time = 0;
    double y = 0.0;
    Eigen::VectorXd w, v;
  };
  std::map<std::string, std::vector<Row>> units;  // ordered: sorts by id

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li].text, comma);
    const std::string here = at(name, lines[li].number);
    if (fields.size() != width)
      throw ParseError(here + ": expected " + std::to_string(width) +
                       " fields, got " + std::to_string(fields.size()));
    Row r;
    r.line = lines[li].number;
    const std::string id = trim(fields[0]);
    if (id.empty()) throw ParseError(here + ": empty cell in column unit_id");
    r.time = int(parse_int_or_throw(fields[1], here + " column time"));
    r.y = parse_real_or_throw(fields[2], here + " column y");
    r.w.resize(p);
    for (int j = 0; j < p; ++j)
      r.w[j] = parse_real_or_throw(fields[3 + j],
                                   here + " column w_" + std::to_string(j + 1));
    r.v.resize(q);
    for (int j = 0; j < q; ++j)
      r.v[j] = parse_real_or_throw(fields[3 + p + j],
                                   here + " column v_" + std::to_string(j + 1));
    auto& rows = units[id];
    for (const Row& prev : rows)
      if (prev.time == r.time)
        throw ParseError(here + ": duplicate time " + std::to_string(r.time) +
                         " for unit '" + id + "' (first at line " +
                         std::to_string(prev.line) + ")");
    rows.push_back(std::move(r));
  }
  if (units.empty()) throw ParseError(name + ": no data rows");

  const int T = int(units.begin()->second.size());
  ParsedPanel out;
  out.data.n = int(units.size());
  out.data.T = T;
  out.data.p = p;
  out.data.q = q;
  for (auto& [id, rows] : units) {
    if (int(rows.size()) != T)
      throw ParseError(name + ": unit '" + id + "' has " +
                       std::to_string(rows.size()) + " rows, expected " +
                       std::to_string(T) + " (line " +
                       std::to_string(rows.front().line) + ")");
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.time < b.time; });
    Eigen::VectorXd y(T);
    Eigen::MatrixXd W(T, p), V(T, q);
    for (int t = 0; t < T; ++t) {
      if (rows[t].time != t + 1)
        throw ParseError(name + ": unit '" + id + "' needs times 1.." +
                         std::to_string(T) + ", found " +
                         std::to_string(rows[t].time) + " (line " +
                         std::to_string(rows[t].line) + ")");
      y[t] = rows[t].y;
      W.row(t) = rows[t].w.transpose();
      V.row(t) = rows[t].v.transpose();
    }
    out.data.Y.push_back(std::move(y));
    out.data.W.push_back(std::move(W));
    out.data.V.push_back(std::move(V));
    out.unit_ids.push_back(id);
  }
  out.data.validate();
  return out;
}

ParsedPanel parse_panel(const std::string& path) {
  return parse_panel_text(read_file(path), path);
}

Eigen::MatrixXd parse_table_text(const std::string& text,
                                 const std::string& name,
                                 const std::vector<std::string>& columns) {
  const auto lines = physical_lines(text);
  if (lines.empty()) throw ParseError(name + ": empty file, header expected");
  const bool comma = lines[0].text.find(',') != std::string::npos;
  const auto header = split_fields(lines[0].text, comma);
  std::string want;
  for (const auto& c : columns) want += (want.empty() ? "" : ", ") + c;
  if (header.size() != columns.size() ||
      !std::equal(header.begin(), header.end(), columns.begin()))
    throw ParseError(at(name, lines[0].number) + ": header must be exactly: " +
                     want);
  Eigen::MatrixXd out(int(lines.size()) - 1, int(columns.size()));
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li].text, comma);
    const std::string here = at(name, lines[li].number);
    if (fields.size() != columns.size())
      throw ParseError(here + ": expected " + std::to_string(columns.size()) +
                       " fields, got " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < columns.size(); ++j)
      out(int(li) - 1, int(j)) =
          parse_real_or_throw(fields[j], here + " column " + columns[j]);
  }
  if (out.rows() == 0) throw ParseError(name + ": no data rows");
  return out;
}

Eigen::MatrixXd parse_table(const std::string& path,
                            const std::vector<std::string>& columns) {
  return parse_table_text(read_file(path), path, columns);
}

namespace {

double config_real(const std::string& tok, const std::string& context) {
  try {
    return parse_real_or_throw(tok, context);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

Eigen::MatrixXd parse_matrix_text(const std::string& text,
                                  const std::string& context) {
  // Newlines and ';' both end a row, so file matrices can be one row per
  // line while inline values stay on one line.
  std::string flat = text;
  std::replace(flat.begin(), flat.end(), '\n', ';');
  std::replace(flat.begin(), flat.end(), ',', ' ');
  std::vector<std::vector<double>> rows;
  std::string row;
  std::istringstream is(flat);
  while (std::getline(is, row, ';')) {
    const auto toks = split_ws(row);
    if (toks.empty()) continue;
    std::vector<double> vals;
    for (const auto& t : toks) vals.push_back(config_real(t, context));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ConfigError(context + ": empty matrix");
  for (const auto& r : rows)
    if (r.size() != rows[0].size())
      throw ConfigError(context + ": ragged matrix literal");
  Eigen::MatrixXd out(int(rows.size()), int(rows[0].size()));
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) = rows[i][j];
  return out;
}

Eigen::VectorXd parse_vector_text(const std::string& text,
                                  const std::string& context) {
  const Eigen::MatrixXd m = parse_matrix_text(text, context);
  if (m.rows() != 1 && m.cols() != 1)
    throw ConfigError(context + ": expected a vector, got " +
                      std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
  if (m.rows() == 1) return m.row(0).transpose();
  return m.col(0);
}

namespace {

std::string resolve_path(const std::string& value, const std::string& base_dir) {
  if (base_dir.empty() || value.empty() || value.front() == '/') return value;
  return base_dir + "/" + value;
}

bool looks_numeric(const std::string& value) {
  return !value.empty() &&
         value.find_first_not_of("0123456789+-.eE,; \t") == std::string::npos;
}

// Inline literal when the value is pure matrix text, file path otherwise.
Eigen::MatrixXd matrix_or_path(const std::string& value,
                               const std::string& base_dir,
                               const std::string& context) {
  if (looks_numeric(value)) return parse_matrix_text(value, context);
  const std::string path = resolve_path(value, base_dir);
  try {
    return parse_matrix_text(read_file(path), context + " (" + path + ")");
  } catch (const IoError& e) {
    throw ConfigError(context + ": value is neither a matrix literal nor a "
                      "readable file: " + std::string(e.what()));
  }
}

long config_int(const std::string& tok, const std::string& context) {
  try {
    return parse_int_or_throw(tok, context);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t config_seed(const std::string& tok, const std::string& context) {
  const std::string t = trim(tok);
  unsigned long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw ConfigError(context + ": not an unsigned integer: '" + t + "'");
  return v;
}

std::vector<double> config_reals(const std::string& value,
                                 const std::string& context) {
  const Eigen::VectorXd v = parse_vector_text(value, context);
  return {v.data(), v.data() + v.size()};
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& key,
                    const std::string& value, const std::string& base_dir,
                    const std::string& context) {
  const std::string ctx = context + ": key '" + key + "'";
  if (key == "data") {
    cfg.data = resolve_path(value, base_dir);
  } else if (key == "out") {
    cfg.out = resolve_path(value, base_dir);
  } else if (key == "target") {
    if (value != "beta" && value != "ame" && value != "variance")
      throw ConfigError(ctx + ": must be beta, ame, or variance, got '" +
                        value + "'");
    cfg.target = value;
  } else if (key == "c1") {
    cfg.C1 = matrix_or_path(value, base_dir, ctx);
  } else if (key == "c2") {
    cfg.C2 = matrix_or_path(value, base_dir, ctx);
  } else if (key == "omega") {
    cfg.Omega = matrix_or_path(value, base_dir, ctx);
  } else if (key == "s2") {
    if (value == "iid" || value == "nonstationary") {
      cfg.s2_preset = value;
      cfg.S2.reset();
    } else {
      cfg.S2 = matrix_or_path(value, base_dir, ctx);
      cfg.s2_preset.reset();
    }
  } else if (key == "psi0") {
    cfg.psi0 = parse_vector_text(value, ctx);
  } else if (key == "zeta") {
    const double z = config_real(value, ctx);
    if (!(z > 0.0 && z < 1.0))
      throw ConfigError(ctx + ": must lie in (0, 1)");
    cfg.zeta = z;
  } else if (key == "folds") {
    const long L = config_int(value, ctx);
    if (L < 1) throw ConfigError(ctx + ": must be at least 1");
    cfg.folds = int(L);
  } else if (key == "seed") {
    cfg.seed = config_seed(value, ctx);
  } else if (key == "threads") {
    const long t = config_int(value, ctx);
    if (t < 1) throw ConfigError(ctx + ": must be at least 1");
    cfg.threads = int(t);
  } else if (key == "nu") {
    cfg.nu = config_real(value, ctx);
  } else if (key == "nu_m") {
    const double v = config_real(value, ctx);
    if (v < 0.0) throw ConfigError(ctx + ": must be nonnegative");
    cfg.nu_M = v;
  } else if (key == "nu_b") {
    const double v = config_real(value, ctx);
    if (v < 0.0) throw ConfigError(ctx + ": must be nonnegative");
    cfg.nu_B = v;
  } else if (key == "lasso_c") {
    const double v = config_real(value, ctx);
    if (v <= 0.0) throw ConfigError(ctx + ": must be positive");
    cfg.lasso.c = v;
  } else if (key == "lasso_gamma") {
    const double v = config_real(value, ctx);
    if (v < 0.0 || v >= 1.0) throw ConfigError(ctx + ": must lie in [0, 1)");
    cfg.lasso.gamma = v;
  } else if (key == "lasso_refinements") {
    const long v = config_int(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be at least 1");
    cfg.lasso.refinements = int(v);
  } else if (key == "lasso_tol") {
    const double v = config_real(value, ctx);
    if (v <= 0.0) throw ConfigError(ctx + ": must be positive");
    cfg.lasso.cd_tol = v;
  } else if (key == "lasso_max_iter") {
    const long v = config_int(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be at least 1");
    cfg.lasso.cd_max_iter = int(v);
  } else if (key == "n") {
    const long v = config_int(value, ctx);
    if (v < 2) throw ConfigError(ctx + ": must be at least 2");
    cfg.n = int(v);
  } else if (key == "reps") {
    const long v = config_int(value, ctx);
    if (v < 0) throw ConfigError(ctx + ": must be nonnegative");
    cfg.reps = int(v);
  } else if (key == "beta0") {
    cfg.beta0 = config_real(value, ctx);
  } else if (key == "levels") {
    auto ls = config_reals(value, ctx);
    for (double l : ls)
      if (!(l > 0.0 && l < 1.0))
        throw ConfigError(ctx + ": every level must lie in (0, 1)");
    cfg.levels = std::move(ls);
  } else if (key == "fd_grids") {
    if (value == "none") {
      cfg.fd_grids.clear();
      return;
    }
    std::vector<int> gs;
    for (double g : config_reals(value, ctx)) {
      if (g != 9.0 && g != 25.0 && g != 49.0)
        throw ConfigError(ctx + ": grids must be 9, 25, or 49");
      gs.push_back(int(g));
    }
    cfg.fd_grids = std::move(gs);
  } else if (key == "deltas") {
    cfg.deltas = config_reals(value, ctx);
  } else if (key == "lambda") {
    cfg.lambda = config_real(value, ctx);
  } else if (key == "proj_nz") {
    const long v = config_int(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be at least 1");
    cfg.proj.n_z = int(v);
  } else if (key == "proj_nalpha") {
    const long v = config_int(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be at least 1");
    cfg.proj.n_alpha = int(v);
  } else if (key == "proj_ks") {
    const long v = config_int(value, ctx);
    if (v < 0) throw ConfigError(ctx + ": must be nonnegative");
    cfg.proj.ks = int(v);
  } else if (key == "k") {
    const long v = config_int(value, ctx);
    if (v < 1) throw ConfigError(ctx + ": must be at least 1");
    cfg.K = int(v);
  } else if (key == "r") {
    cfg.tva_r = parse_vector_text(value, ctx);
  } else if (key == "r_dtheta") {
    cfg.tva_r_dtheta = parse_vector_text(value, ctx);
  } else if (key == "radius") {
    const double v = config_real(value, ctx);
    if (v <= 0.0) throw ConfigError(ctx + ": must be positive");
    cfg.tva_radius = v;
  } else if (key == "theta") {
    const double v = config_real(value, ctx);
    if (v <= 0.0) throw ConfigError(ctx + ": must be positive");
    cfg.theta = v;
  } else if (key == "mu_y") {
    cfg.mu_y = config_real(value, ctx);
  } else if (key == "sigma_alpha_sq") {
    const double v = config_real(value, ctx);
    if (v < 0.0) throw ConfigError(ctx + ": must be nonnegative");
    cfg.sigma_alpha_sq = v;
  } else {
    throw ConfigError(context + ": unknown config key '" + key + "'");
  }
}

RunConfig parse_config_text(const std::string& text, const std::string& name,
                            const std::string& base_dir) {
  RunConfig cfg;
  std::set<std::string> seen;
  int number = 0;
  std::string raw;
  std::istringstream is(text);
  while (std::getline(is, raw)) {
    ++number;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string here = at(name, number);
    if (eq == std::string::npos)
      throw ConfigError(here + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(here + ": missing key before '='");
    if (!seen.insert(key).second)
      throw ConfigError(here + ": duplicate key '" + key + "'");
    set_config_key(cfg, key, value, base_dir, here);
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const std::string base_dir =
      slash == std::string::npos ? "" : path.substr(0, slash);
  return parse_config_text(read_file(path), path, base_dir);
}

}  // namespace uhm::io
