#include "uhmom.h"

#include <charconv>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "core/driver.hpp"
#include "core/panel_io.hpp"

struct uhm_job {
  uhm::io::RunConfig cfg;
};

struct uhm_result {
  uhm::driver::Report report;
  std::string text;  // rendered once so the pointer stays stable
  std::string written_path;
};

namespace {

thread_local std::string g_error;

template <typename F>
uhm_status guarded(F&& body) noexcept {
  try {
    body();
    g_error.clear();
    return UHM_OK;
  } catch (const uhm::io::ConfigError& e) {
    g_error = e.what();
    return UHM_ERR_CONFIG;
  } catch (const uhm::io::ParseError& e) {
    g_error = e.what();
    return UHM_ERR_PARSE;
  } catch (const uhm::io::IoError& e) {
    g_error = e.what();
    return UHM_ERR_IO;
  } catch (const std::invalid_argument& e) {
    g_error = e.what();
    return UHM_ERR_ARGUMENT;
  } catch (const std::exception& e) {
    g_error = e.what();
    return UHM_ERR_NUMERIC;
  } catch (...) {
    g_error = "unidentified failure";
    return UHM_ERR_INTERNAL;
  }
}

uhm_status fail_argument(const std::string& message) noexcept {
  g_error = message;
  return UHM_ERR_ARGUMENT;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw uhm::io::IoError("cannot open for writing: " + path);
  f << content;
  f.flush();
  if (!f) throw uhm::io::IoError("write failed: " + path);
}

}  // namespace

extern "C" {

const char* uhm_version(void) { return uhm::driver::kVersion; }

const char* uhm_status_name(uhm_status s) {
  switch (s) {
    case UHM_OK: return "UHM_OK";
    case UHM_ERR_ARGUMENT: return "UHM_ERR_ARGUMENT";
    case UHM_ERR_CONFIG: return "UHM_ERR_CONFIG";
    case UHM_ERR_PARSE: return "UHM_ERR_PARSE";
    case UHM_ERR_IO: return "UHM_ERR_IO";
    case UHM_ERR_NUMERIC: return "UHM_ERR_NUMERIC";
    case UHM_ERR_INTERNAL: return "UHM_ERR_INTERNAL";
  }
  return "UHM_ERR_UNKNOWN";
}

const char* uhm_error_message(void) { return g_error.c_str(); }

uhm_job* uhm_job_new(void) {
  try {
    return new uhm_job();
  } catch (...) {
    return nullptr;
  }
}

void uhm_job_free(uhm_job* job) { delete job; }

uhm_status uhm_job_set(uhm_job* job, const char* key, const char* value) {
  if (!job) return fail_argument("uhm_job_set: null job");
  if (!key) return fail_argument("uhm_job_set: null key");
  if (!value) return fail_argument("uhm_job_set: null value");
  return guarded([&] {
    uhm::io::set_config_key(job->cfg, key, value, "", "uhm_job_set");
  });
}

uhm_status uhm_job_load_config(uhm_job* job, const char* path) {
  if (!job) return fail_argument("uhm_job_load_config: null job");
  if (!path) return fail_argument("uhm_job_load_config: null path");
  return guarded([&] { job->cfg = uhm::io::parse_config(path); });
}

uhm_status uhm_job_run(uhm_job* job, const char* command, uhm_result** out) {
  if (out) *out = nullptr;
  if (!job) return fail_argument("uhm_job_run: null job");
  if (!command) return fail_argument("uhm_job_run: null command");
  if (!out) return fail_argument("uhm_job_run: null result pointer");
  return guarded([&] {
    auto result = std::make_unique<uhm_result>();
    result->report = uhm::driver::run(command, job->cfg);
    result->text = result->report.text();
    if (job->cfg.out) {
      write_file(*job->cfg.out, result->text);
      for (const auto& [name, body] : result->report.tables)
        write_file(*job->cfg.out + "." + name + ".csv", body);
      result->written_path = *job->cfg.out;
    }
    *out = result.release();
  });
}

void uhm_result_free(uhm_result* r) { delete r; }

const char* uhm_result_report(const uhm_result* r) {
  return r ? r->text.c_str() : "";
}

const char* uhm_result_written_path(const uhm_result* r) {
  if (!r || r->written_path.empty()) return nullptr;
  return r->written_path.c_str();
}

uhm_status uhm_result_value(const uhm_result* r, const char* key,
                            double* out) {
  if (!r) return fail_argument("uhm_result_value: null result");
  if (!key) return fail_argument("uhm_result_value: null key");
  if (!out) return fail_argument("uhm_result_value: null out");
  for (const auto& [k, v] : r->report.fields) {
    if (k != key) continue;
    if (v == "true") {
      *out = 1.0;
      g_error.clear();
      return UHM_OK;
    }
    if (v == "false") {
      *out = 0.0;
      g_error.clear();
      return UHM_OK;
    }
    double parsed = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), parsed);
    if (ec != std::errc{} || ptr != v.data() + v.size())
      return fail_argument("field '" + std::string(key) +
                           "' is not numeric: '" + v + "'");
    *out = parsed;
    g_error.clear();
    return UHM_OK;
  }
  return fail_argument("no field '" + std::string(key) + "' in report");
}

size_t uhm_result_table_count(const uhm_result* r) {
  return r ? r->report.tables.size() : 0;
}

const char* uhm_result_table_name(const uhm_result* r, size_t index) {
  if (!r || index >= r->report.tables.size()) return nullptr;
  return r->report.tables[index].first.c_str();
}

const char* uhm_result_table_text(const uhm_result* r, const char* name) {
  if (!r || !name) return nullptr;
  for (const auto& [n, body] : r->report.tables)
    if (n == name) return body.c_str();
  return nullptr;
}

}  // extern "C"
