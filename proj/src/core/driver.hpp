#ifndef UHMOM_DRIVER_HPP
#define UHMOM_DRIVER_HPP

#include <string>
#include <utility>
#include <vector>

#include "core/panel_io.hpp"

// Command dispatch and report assembly. A report is an ordered list of
// key: value fields plus named delimiter-separated tables; rendering is
// deterministic, so identical inputs and seed give byte-identical text.
// Wall-clock timings never enter the report for that reason; the CLI prints
// them to stderr instead.

namespace uhm::driver {

inline constexpr char kVersion[] = "0.1.0";

struct Report {
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<std::pair<std::string, std::string>> tables;  // name, DSV body

  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, const char* value);
  void add(const std::string& key, double value);
  void add(const std::string& key, int value);
  void add(const std::string& key, bool value);
  void add_seed(const std::string& key, std::uint64_t value);

  std::string text() const;
};

// Shortest decimal form that parses back to the same double.
std::string format_real(double v);

const std::vector<std::string>& commands();

// Executes one command against a fully resolved configuration. Throws
// io::ConfigError for missing or inconsistent parameters, io::ParseError /
// io::IoError from input handling, and whatever the numeric modules throw.
Report run(const std::string& command, const io::RunConfig& cfg);

}  // namespace uhm::driver

#endif
