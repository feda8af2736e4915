#include "samrank/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace samrank::io {

namespace {

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(value >> (8 * i))));
  }
}

template <class T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw FormatError("cannot parse " + what + " '" + s + "' as a number");
  }
  return v;
}

std::uint64_t parse_count(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("cannot parse " + what + " '" + s + "' as a count");
  }
  return v;
}

}  // namespace

std::string encode_matrix(const linalg::Matrix& m) {
  std::string out;
  out.reserve(kMatrixHeaderBytes + 8 * m.size());
  out.append(kMatrixMagic, 4);
  put_le<std::uint32_t>(out, kMatrixVersion);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  for (double v : m.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_le<std::uint64_t>(out, bits);
  }
  return out;
}

linalg::Matrix decode_matrix(std::string_view bytes, std::size_t& offset) {
  const std::size_t start = offset;
  const std::size_t avail = bytes.size() - std::min(bytes.size(), start);
  if (avail < kMatrixHeaderBytes) {
    throw FormatError("truncated header at byte offset " + std::to_string(start) + ": expected " +
                      std::to_string(kMatrixHeaderBytes) + " bytes, found " +
                      std::to_string(avail));
  }
  if (bytes.substr(start, 4) != std::string_view(kMatrixMagic, 4)) {
    throw FormatError("bad magic at byte offset " + std::to_string(start) +
                      ": expected \"FMAT\"");
  }
  const auto version = get_le<std::uint32_t>(bytes, start + 4);
  if (version != kMatrixVersion) {
    throw FormatError("unsupported version " + std::to_string(version) + " at byte offset " +
                      std::to_string(start + 4));
  }
  const auto rows = get_le<std::uint64_t>(bytes, start + 8);
  const auto cols = get_le<std::uint64_t>(bytes, start + 16);
  if (cols != 0 && rows > (std::uint64_t{1} << 60) / cols) {
    throw FormatError("implausible shape at byte offset " + std::to_string(start + 8));
  }
  const std::uint64_t payload = 8 * rows * cols;
  const std::size_t have = avail - kMatrixHeaderBytes;
  if (have < payload) {
    throw FormatError("truncated payload at byte offset " +
                      std::to_string(start + kMatrixHeaderBytes) + ": expected " +
                      std::to_string(payload) + " bytes, found " + std::to_string(have));
  }
  std::vector<double> data(rows * cols);
  std::size_t pos = start + kMatrixHeaderBytes;
  for (double& v : data) {
    const auto bits = get_le<std::uint64_t>(bytes, pos);
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) {
      throw FormatError("non-finite value at byte offset " + std::to_string(pos));
    }
    pos += 8;
  }
  offset = pos;
  linalg::Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

linalg::Matrix decode_matrix(std::string_view bytes) {
  std::size_t offset = 0;
  linalg::Matrix m = decode_matrix(bytes, offset);
  if (offset != bytes.size()) {
    throw FormatError("trailing data at byte offset " + std::to_string(offset) + ": expected " +
                      std::to_string(offset) + " bytes, found " + std::to_string(bytes.size()));
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_matrix_file(const std::filesystem::path& path, const linalg::Matrix& m) {
  write_file(path, encode_matrix(m));
}

linalg::Matrix read_matrix_file(const std::filesystem::path& path) {
  return decode_matrix(read_file(path));
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string train_log_csv(const experiments::TrainLog& log, std::string_view header_comment) {
  std::ostringstream os;
  if (!header_comment.empty()) {
    for (const auto& line : split(header_comment, '\n')) os << "# " << line << '\n';
  }
  os << "step,train_loss,test_loss";
  for (double t : log.thresholds) os << ",rank@" << format_real(t);
  os << ",active_units,weight_norm,knn_error\n";
  for (const auto& r : log.records) {
    os << r.step << ',' << format_real(r.train_loss) << ',' << format_real(r.test_loss);
    for (std::size_t k : r.ranks) os << ',' << k;
    os << ',' << r.active_units << ',' << format_real(r.weight_norm) << ',';
    if (r.knn_error) os << format_real(*r.knn_error);
    os << '\n';
  }
  return os.str();
}

experiments::TrainLog parse_train_log_csv(std::string_view text) {
  experiments::TrainLog log;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line, ',');
    const std::string where = "line " + std::to_string(line_no);
    if (header.empty()) {
      header = cells;
      if (header.size() < 6 || header[0] != "step") {
        throw FormatError(where + ": not a train-log header");
      }
      for (std::size_t i = 3; i + 3 < header.size(); ++i) {
        if (header[i].rfind("rank@", 0) != 0) throw FormatError(where + ": bad column " + header[i]);
        log.thresholds.push_back(parse_real(header[i].substr(5), "threshold"));
      }
      continue;
    }
    if (cells.size() != header.size()) {
      throw FormatError(where + ": expected " + std::to_string(header.size()) + " cells, found " +
                        std::to_string(cells.size()));
    }
    experiments::LogRecord r;
    r.step = parse_count(cells[0], "step");
    r.train_loss = parse_real(cells[1], "train_loss");
    r.test_loss = parse_real(cells[2], "test_loss");
    for (std::size_t i = 0; i < log.thresholds.size(); ++i)
      r.ranks.push_back(parse_count(cells[3 + i], "rank"));
    const std::size_t base = 3 + log.thresholds.size();
    r.active_units = parse_count(cells[base], "active_units");
    r.weight_norm = parse_real(cells[base + 1], "weight_norm");
    if (!cells[base + 2].empty()) r.knn_error = parse_real(cells[base + 2], "knn_error");
    log.records.push_back(std::move(r));
  }
  if (header.empty()) throw FormatError("train log has no header");
  return log;
}

namespace {

linalg::Matrix row_matrix(std::span<const double> v) {
  linalg::Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

nets::Vector as_vector(const linalg::Matrix& m) {
  return nets::Vector(m.data().begin(), m.data().end());
}

}  // namespace

std::string encode_net(const AnyNet& net, std::uint64_t seed, std::string_view config_hash) {
  std::ostringstream head;
  std::string body;
  head << "samrank-net 1\n";
  if (const auto* two = std::get_if<nets::TwoLayerNet>(&net)) {
    head << "kind=two_layer\n"
         << "activation=" << nets::to_string(two->act) << '\n'
         << "d_in=" << two->input_dim() << '\n'
         << "width=" << two->width() << '\n'
         << "b1=" << (two->b1 ? 1 : 0) << '\n'
         << "b2=" << (two->b2 ? 1 : 0) << '\n';
    body += encode_matrix(two->w);
    body += encode_matrix(row_matrix(two->a));
    if (two->b1) body += encode_matrix(row_matrix(*two->b1));
    if (two->b2) body += encode_matrix(linalg::Matrix(1, 1, *two->b2));
  } else {
    const auto& mlp = std::get<nets::Mlp>(net);
    head << "kind=mlp\n"
         << "layers=" << mlp.layers.size() << '\n';
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      head << "layer" << i << '=' << mlp.layer_input_dim(i) << ',' << mlp.layer_output_dim(i)
           << ',' << nets::to_string(mlp.layers[i].act) << '\n';
    }
    head << "bottleneck_h=" << (mlp.bottleneck ? mlp.bottleneck->inner_dim() : 0) << '\n';
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      if (mlp.bottleneck && i + 1 == mlp.layers.size()) {
        body += encode_matrix(mlp.bottleneck->u);
        body += encode_matrix(mlp.bottleneck->v);
      } else {
        body += encode_matrix(mlp.layers[i].weight);
      }
      body += encode_matrix(row_matrix(mlp.layers[i].bias));
    }
  }
  head << "seed=" << seed << '\n' << "config_hash=" << config_hash << '\n' << "end\n";
  return head.str() + body;
}

AnyNet decode_net(std::string_view bytes) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool ended = false;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) break;
    const std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != "samrank-net 1") throw FormatError("line 1: not a samrank net file");
      continue;
    }
    if (line == "end") {
      ended = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected key=value");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!ended) throw FormatError("net header is missing its 'end' line");
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("net header is missing '" + key + "'");
    return it->second;
  };
  auto check_shape = [](const linalg::Matrix& m, std::size_t r, std::size_t c, const char* what) {
    if (m.rows() != r || m.cols() != c) {
      throw FormatError(std::string("net block ") + what + " has shape " + m.shape_string() +
                        ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };

  AnyNet result;
  if (get("kind") == "two_layer") {
    nets::TwoLayerNet net;
    net.act = nets::activation_from_string(get("activation"));
    const std::size_t d = parse_count(get("d_in"), "d_in");
    const std::size_t m = parse_count(get("width"), "width");
    net.w = decode_matrix(bytes, pos);
    check_shape(net.w, m, d, "W");
    const auto a = decode_matrix(bytes, pos);
    check_shape(a, 1, m, "a");
    net.a = as_vector(a);
    if (get("b1") == "1") {
      const auto b1 = decode_matrix(bytes, pos);
      check_shape(b1, 1, m, "b1");
      net.b1 = as_vector(b1);
    }
    if (get("b2") == "1") {
      const auto b2 = decode_matrix(bytes, pos);
      check_shape(b2, 1, 1, "b2");
      net.b2 = b2(0, 0);
    }
    result = std::move(net);
  } else if (get("kind") == "mlp") {
    nets::Mlp net;
    const std::size_t depth = parse_count(get("layers"), "layers");
    const std::size_t h = parse_count(get("bottleneck_h"), "bottleneck_h");
    for (std::size_t i = 0; i < depth; ++i) {
      const auto parts = split(get("layer" + std::to_string(i)), ',');
      if (parts.size() != 3) throw FormatError("layer" + std::to_string(i) + ": expected in,out,act");
      const std::size_t in = parse_count(parts[0], "layer input");
      const std::size_t out = parse_count(parts[1], "layer output");
      nets::Layer layer;
      layer.act = nets::activation_from_string(parts[2]);
      if (h > 0 && i + 1 == depth) {
        nets::Bottleneck bn;
        bn.u = decode_matrix(bytes, pos);
        check_shape(bn.u, in, h, "u");
        bn.v = decode_matrix(bytes, pos);
        check_shape(bn.v, h, out, "v");
        net.bottleneck = std::move(bn);
      } else {
        layer.weight = decode_matrix(bytes, pos);
        check_shape(layer.weight, out, in, "weight");
      }
      const auto bias = decode_matrix(bytes, pos);
      check_shape(bias, 1, out, "bias");
      layer.bias = as_vector(bias);
      net.layers.push_back(std::move(layer));
    }
    net.validate();
    result = std::move(net);
  } else {
    throw FormatError("unknown net kind '" + get("kind") + "'");
  }
  if (pos != bytes.size()) {
    throw FormatError("trailing data at byte offset " + std::to_string(pos));
  }
  return result;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace samrank::io
