#include <chrono>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uhmom.h"

// Thin shell over the C API: parse flags, forward them as config
// assignments, run one command, print the report. Timings go to stderr so
// the report itself stays byte-identical across reruns.

namespace {

struct JobDeleter {
  void operator()(uhm_job* j) const { uhm_job_free(j); }
};
struct ResultDeleter {
  void operator()(uhm_result* r) const { uhm_result_free(r); }
};

int fail(uhm_status status) {
  std::fprintf(stderr, "error: %s: %s\n", uhm_status_name(status),
               uhm_error_message());
  return int(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"score tests and debiased moments for models with "
               "nonparametric unobserved heterogeneity"};
  app.set_version_flag("--version", []() { return uhm_version(); });

  std::string command;
  app.add_option("command", command, "one of: fit-beta, fit-ame, "
                 "fit-variance, kotlarski-moments, tva-moment, mc-size, "
                 "mc-power")
      ->required();

  // Flag values stay strings and reuse the config-file vocabulary; only
  // flags the user actually passed are forwarded, so config-file settings
  // survive unless overridden.
  std::vector<std::pair<std::string, CLI::Option*>> forwarded;
  std::vector<std::unique_ptr<std::string>> storage;
  auto forward = [&](const std::string& flag, const std::string& key,
                     const std::string& help) {
    storage.push_back(std::make_unique<std::string>());
    forwarded.emplace_back(key, app.add_option(flag, *storage.back(), help));
  };
  std::string config_path;
  CLI::Option* config_opt =
      app.add_option("--config", config_path, "key = value configuration file");
  forward("--data", "data", "input data file");
  forward("--target", "target", "beta, ame, or variance");
  forward("--psi0", "psi0", "hypothesized target value(s)");
  forward("--zeta", "zeta", "test size (default 0.05)");
  forward("--folds", "folds", "cross-fitting folds (default 4)");
  forward("--seed", "seed", "RNG seed");
  forward("--out", "out", "report destination (default stdout)");
  forward("--threads", "threads", "worker threads for the mc commands");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
    std::fprintf(stderr, "error: UHM_ERR_ARGUMENT: %s\n", e.what());
    return int(UHM_ERR_ARGUMENT);
  }

  std::unique_ptr<uhm_job, JobDeleter> job(uhm_job_new());
  if (!job) {
    std::fprintf(stderr, "error: UHM_ERR_INTERNAL: job allocation failed\n");
    return int(UHM_ERR_INTERNAL);
  }

  if (config_opt->count() > 0) {
    const uhm_status s = uhm_job_load_config(job.get(), config_path.c_str());
    if (s != UHM_OK) return fail(s);
  }
  for (std::size_t i = 0; i < forwarded.size(); ++i) {
    if (forwarded[i].second->count() == 0) continue;
    const uhm_status s = uhm_job_set(job.get(), forwarded[i].first.c_str(),
                                     storage[i]->c_str());
    if (s != UHM_OK) return fail(s);
  }

  const auto start = std::chrono::steady_clock::now();
  uhm_result* raw = nullptr;
  const uhm_status s = uhm_job_run(job.get(), command.c_str(), &raw);
  std::unique_ptr<uhm_result, ResultDeleter> result(raw);
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  if (s != UHM_OK) return fail(s);

  if (!uhm_result_written_path(result.get()))
    std::fputs(uhm_result_report(result.get()), stdout);
  std::fprintf(stderr, "timing: %s %.3fs\n", command.c_str(), elapsed.count());
  return 0;
}
