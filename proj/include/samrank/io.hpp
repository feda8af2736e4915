#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "samrank/experiments.hpp"
#include "samrank/linalg.hpp"
#include "samrank/nets.hpp"

namespace samrank::io {

/// Raised for malformed files; the message names the byte offset or line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary feature-matrix format, little-endian:
//   "FMAT" | u32 version = 1 | u64 rows | u64 cols | rows*cols f64, row-major.
inline constexpr char kMatrixMagic[4] = {'F', 'M', 'A', 'T'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 24;

std::string encode_matrix(const linalg::Matrix& m);
/// Decodes one matrix starting at `offset`; advances `offset` past it. The
/// offsets in error messages are absolute within `bytes`.
linalg::Matrix decode_matrix(std::string_view bytes, std::size_t& offset);
/// Decodes a buffer holding exactly one matrix.
linalg::Matrix decode_matrix(std::string_view bytes);

void write_matrix_file(const std::filesystem::path& path, const linalg::Matrix& m);
linalg::Matrix read_matrix_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal form (at most 17 significant digits) that reads back exactly.
std::string format_real(double v);

// CSV train log. Preceded by '#' comment lines carrying provenance.
std::string train_log_csv(const experiments::TrainLog& log, std::string_view header_comment);
experiments::TrainLog parse_train_log_csv(std::string_view text);

using AnyNet = std::variant<nets::TwoLayerNet, nets::Mlp>;

/// Text header of `key=value` lines ending in `end`, then the parameter
/// matrices in FMAT encoding.
std::string encode_net(const AnyNet& net, std::uint64_t seed, std::string_view config_hash);
AnyNet decode_net(std::string_view bytes);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace samrank::io
