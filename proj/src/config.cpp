#include "samrank/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "samrank/io.hpp"

namespace samrank::config {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double to_real(std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return out;
}

std::uint64_t to_count(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_flag(std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("expected on/off, got '" + std::string(v) + "'");
}

template <class T, class Fn>
std::vector<T> to_list(std::string_view v, Fn&& parse) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    const std::string item = trim(v.substr(start, comma - start));
    if (item.empty()) throw std::invalid_argument("empty list element");
    out.push_back(parse(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string list_to_string(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_real(v[i]);
  return s;
}

std::string list_to_string(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define REAL_FIELD(path)                                                       \
  Field {                                                                      \
    [](RunConfig& c, std::string_view v) { c.path = to_real(v); },             \
        [](const RunConfig& c) { return io::format_real(c.path); }             \
  }
#define COUNT_FIELD(path)                                                      \
  Field {                                                                      \
    [](RunConfig& c, std::string_view v) { c.path = to_count(v); },            \
        [](const RunConfig& c) { return std::to_string(c.path); }              \
  }
#define FLAG_FIELD(path)                                                       \
  Field {                                                                      \
    [](RunConfig& c, std::string_view v) { c.path = to_flag(v); },             \
        [](const RunConfig& c) { return std::string(c.path ? "on" : "off"); }  \
  }

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      {"ts.d_in", COUNT_FIELD(ts.d_in)},
      {"ts.teacher_neurons", COUNT_FIELD(ts.teacher_neurons)},
      {"ts.student_neurons", COUNT_FIELD(ts.student_neurons)},
      {"ts.n_train", COUNT_FIELD(ts.n_train)},
      {"ts.n_test", COUNT_FIELD(ts.n_test)},
      {"ts.teacher_init_std", REAL_FIELD(ts.teacher_init_std)},
      {"ts.student_init_std", REAL_FIELD(ts.student_init_std)},
      {"ts.input_std", REAL_FIELD(ts.input_std)},
      {"ts.student_bias_init_std", REAL_FIELD(ts.student_bias_init_std)},
      {"ts.student_biases", FLAG_FIELD(ts.student_biases)},
      {"ts.seed", COUNT_FIELD(ts.seed)},
      {"ts.activation",
       {[](RunConfig& c, std::string_view v) { c.ts.activation = nets::activation_from_string(v); },
        [](const RunConfig& c) { return std::string(nets::to_string(c.ts.activation)); }}},
      {"optim.learning_rate", REAL_FIELD(optim.learning_rate)},
      {"optim.weight_decay", REAL_FIELD(optim.weight_decay)},
      {"optim.batch_size", COUNT_FIELD(optim.batch_size)},
      {"optim.steps", COUNT_FIELD(optim.steps)},
      {"optim.seed", COUNT_FIELD(optim.seed)},
      {"optim.method",
       {[](RunConfig& c, std::string_view v) { c.method = optim::method_from_string(v); },
        [](const RunConfig& c) { return std::string(optim::to_string(c.method)); }}},
      {"sam.rho", REAL_FIELD(sam.rho)},
      {"sam.active_fraction", REAL_FIELD(sam.active_fraction)},
      {"sam.norm_epsilon", REAL_FIELD(sam.norm_epsilon)},
      {"sweep.rho_grid",
       {[](RunConfig& c, std::string_view v) { c.rho_grid = to_list<double>(v, to_real); },
        [](const RunConfig& c) { return list_to_string(c.rho_grid); }}},
      {"sweep.seeds",
       {[](RunConfig& c, std::string_view v) { c.seeds = to_list<std::uint64_t>(v, to_count); },
        [](const RunConfig& c) { return list_to_string(c.seeds); }}},
      {"sweep.jobs", COUNT_FIELD(jobs)},
      {"diag.thresholds",
       {[](RunConfig& c, std::string_view v) { c.diag.thresholds = to_list<double>(v, to_real); },
        [](const RunConfig& c) { return list_to_string(c.diag.thresholds); }}},
      {"diag.primary_threshold", REAL_FIELD(diag.primary_threshold)},
      {"diag.center", FLAG_FIELD(diag.center)},
      {"diag.knn_k", COUNT_FIELD(diag.knn_k)},
      {"diag.cadence", COUNT_FIELD(diag.cadence)},
      {"output.dir",
       {[](RunConfig& c, std::string_view v) { c.out_dir = std::string(v); },
        [](const RunConfig& c) { return c.out_dir; }}},
  };
  return table;
}

#undef REAL_FIELD
#undef COUNT_FIELD
#undef FLAG_FIELD

}  // namespace

void set_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  try {
    it->second.set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("key '" + std::string(key) + "': " + e.what());
  }
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::string line = trim(text.substr(start, nl - start));
    ++line_no;
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(cfg) << '\n';
  return os.str();
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : fields()) keys.push_back(key);
  return keys;
}

std::string config_hash(const RunConfig& cfg) {
  // Where results go and how many workers compute them do not change the
  // results, so they stay out of the hash.
  RunConfig canonical = cfg;
  canonical.out_dir = RunConfig{}.out_dir;
  canonical.jobs = RunConfig{}.jobs;
  return io::fnv1a_hex(render_config(canonical));
}

std::vector<double> parse_real_list(std::string_view text) {
  return to_list<double>(text, to_real);
}

}  // namespace samrank::config
