#pragma once

// SQS1 container.
//
//   magic   "SQS1"
//   u32     format version (1)
//   u32     section tag (1 matrix, 2 sketch, 3 block sketch)
//   ...     section payload
//   u32     CRC32 of every preceding byte
//
// All integers little-endian, reals IEEE-754 binary64.
//
// Params block (matrix and sketch): n, k, w, d as u64; eps f64; norm u8;
// seed u64. A matrix follows it with its column table, n * d entries of
// (u64 row, i8 sign) in column-major order. A sketch follows it with a u64
// length and that many f64 values.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace sqs {

struct Sketch;
class SketchMatrix;
struct BlockSketch;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kFormatVersion = 1;

enum class SectionTag : std::uint32_t { Matrix = 1, Sketch = 2, BlockSketch = 3 };

std::vector<std::uint8_t> serialize(const SketchMatrix& matrix);
std::vector<std::uint8_t> serialize(const Sketch& sketch);
std::vector<std::uint8_t> serialize(const BlockSketch& sketch);

/// Throw FormatError on bad magic, version, tag, truncation, trailing bytes or
/// checksum mismatch.
SketchMatrix deserialize_matrix(std::span<const std::uint8_t> bytes);
Sketch deserialize_sketch(std::span<const std::uint8_t> bytes);
BlockSketch deserialize_block_sketch(std::span<const std::uint8_t> bytes);

/// Section tag of a container, after validating its header and checksum.
SectionTag peek_section(std::span<const std::uint8_t> bytes);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace sqs
