#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "samrank/experiments.hpp"
#include "samrank/optim.hpp"

namespace samrank::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a train or sweep run needs. Every field has a default.
struct RunConfig {
  experiments::TeacherStudentSpec ts;
  optim::OptimConfig optim;
  optim::SamConfig sam;
  optim::Method method = optim::Method::sam;
  std::vector<double> rho_grid{0.0, 0.05, 0.1, 0.2, 0.4, 0.6};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  experiments::DiagnosticsConfig diag;
  std::string out_dir = "samrank_out";
  std::size_t jobs = 1;
};

/// Parses flat `section.key = value` lines. Blank lines and lines starting
/// with '#' are ignored. Unknown keys, duplicate keys and bad values throw
/// ConfigError naming `source` and the line number.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");

/// Applies one `key=value` assignment, as from a config line.
void set_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// All keys in canonical order with their resolved values.
std::string render_config(const RunConfig& cfg);
std::vector<std::string> known_keys();

/// FNV-1a hash of render_config(cfg) with output.dir and sweep.jobs reset to
/// their defaults.
std::string config_hash(const RunConfig& cfg);

std::vector<double> parse_real_list(std::string_view text);

}  // namespace samrank::config
