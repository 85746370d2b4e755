#include "sqs/serialize.hpp"

#include <zlib.h>

#include <fstream>
#include <string>

#include "sqs/block_sparse.hpp"
#include "sqs/sketch_core.hpp"
#include "wire.hpp"

namespace sqs {

namespace {

constexpr std::string_view kMagic = "SQS1";

wire::Writer begin(SectionTag tag) {
  wire::Writer out;
  out.put_raw(kMagic);
  out.put<std::uint32_t>(kFormatVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(tag));
  return out;
}

std::vector<std::uint8_t> finish(wire::Writer& out) {
  const std::uint32_t crc = crc32(out.bytes());
  out.put<std::uint32_t>(crc);
  return std::move(out.bytes());
}

// Validates framing and returns the payload (between header and CRC).
std::span<const std::uint8_t> open(std::span<const std::uint8_t> bytes, SectionTag* tag) {
  constexpr std::size_t header = 4 + 4 + 4;
  if (bytes.size() < header + 4) throw FormatError("truncated stream");
  wire::Reader head(bytes);
  if (head.get_raw(4) != kMagic) throw FormatError("bad magic");
  const auto version = head.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw FormatError("unsupported format version " + std::to_string(version));
  const auto raw_tag = head.get<std::uint32_t>();
  if (raw_tag < 1 || raw_tag > 3) throw FormatError("unknown section tag " + std::to_string(raw_tag));
  const auto body = bytes.first(bytes.size() - 4);
  wire::Reader trailer(bytes.last(4));
  if (trailer.get<std::uint32_t>() != crc32(body)) throw FormatError("checksum mismatch");
  *tag = static_cast<SectionTag>(raw_tag);
  return body.subspan(header);
}

std::span<const std::uint8_t> open_expecting(std::span<const std::uint8_t> bytes, SectionTag want) {
  SectionTag tag{};
  auto payload = open(bytes, &tag);
  if (tag != want) throw FormatError("unexpected section tag " + std::to_string(static_cast<std::uint32_t>(tag)));
  return payload;
}

void put_params(wire::Writer& out, const SketchParams& p) {
  out.put<std::uint64_t>(p.n);
  out.put<std::uint64_t>(p.k);
  out.put<std::uint64_t>(p.w);
  out.put<std::uint64_t>(p.d);
  out.put<double>(p.eps);
  out.put<std::uint8_t>(static_cast<std::uint8_t>(p.norm));
  out.put<std::uint64_t>(p.seed);
}

SketchParams get_params(wire::Reader& in) {
  SketchParams p;
  p.n = in.get<std::uint64_t>();
  p.k = in.get<std::uint64_t>();
  p.w = in.get<std::uint64_t>();
  const auto d = in.get<std::uint64_t>();
  if (d > UINT32_MAX) throw FormatError("column sparsity out of range");
  p.d = static_cast<std::uint32_t>(d);
  p.eps = in.get<double>();
  const auto norm = in.get<std::uint8_t>();
  if (norm > 1) throw FormatError("unknown norm tag");
  p.norm = static_cast<Norm>(norm);
  p.seed = in.get<std::uint64_t>();
  return p;
}

void expect_end(const wire::Reader& in) {
  if (in.remaining() != 0) throw FormatError("trailing bytes after payload");
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t at = 0;
  while (at < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - at, 1U << 30));
    crc = ::crc32(crc, bytes.data() + at, chunk);
    at += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize(const SketchMatrix& matrix) {
  auto out = begin(SectionTag::Matrix);
  put_params(out, matrix.params());
  const auto rows = matrix.all_rows();
  const auto signs = matrix.all_signs();
  for (std::size_t at = 0; at < rows.size(); ++at) {
    out.put<std::uint64_t>(rows[at]);
    out.put<std::int8_t>(signs[at]);
  }
  return finish(out);
}

std::vector<std::uint8_t> serialize(const Sketch& sketch) {
  auto out = begin(SectionTag::Sketch);
  put_params(out, sketch.params);
  out.put<std::uint64_t>(sketch.values.size());
  out.put_array<double>(sketch.values);
  return finish(out);
}

std::vector<std::uint8_t> serialize(const BlockSketch& sketch) {
  auto out = begin(SectionTag::BlockSketch);
  const BlockParams& p = sketch.params;
  for (std::uint64_t v : {p.n, p.b, p.k, p.s, p.t, p.m, p.l, p.seed}) out.put<std::uint64_t>(v);
  out.put<double>(p.eps);
  out.put<double>(p.alpha);
  out.put_array<double>(sketch.projector);
  for (std::uint64_t i = 0; i < p.m; ++i) {
    out.put<std::uint64_t>(sketch.bucket_hash[i].a);
    out.put<std::uint64_t>(sketch.bucket_hash[i].c);
    out.put<std::uint64_t>(sketch.sign_hash[i].a);
    out.put<std::uint64_t>(sketch.sign_hash[i].c);
  }
  out.put_array<double>(sketch.tables);
  return finish(out);
}

SectionTag peek_section(std::span<const std::uint8_t> bytes) {
  SectionTag tag{};
  open(bytes, &tag);
  return tag;
}

SketchMatrix deserialize_matrix(std::span<const std::uint8_t> bytes) {
  wire::Reader in(open_expecting(bytes, SectionTag::Matrix));
  const SketchParams p = get_params(in);
  if (p.d == 0 || p.n > in.remaining() / (9 * static_cast<std::uint64_t>(p.d)))
    throw FormatError("truncated stream");
  std::vector<std::uint32_t> rows(p.n * p.d);
  std::vector<std::int8_t> signs(p.n * p.d);
  for (std::size_t at = 0; at < rows.size(); ++at) {
    const auto row = in.get<std::uint64_t>();
    if (row >= p.w) throw FormatError("row index out of range");
    rows[at] = static_cast<std::uint32_t>(row);
    signs[at] = in.get<std::int8_t>();
  }
  expect_end(in);
  try {
    return SketchMatrix(p, std::move(rows), std::move(signs));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid matrix: ") + e.what());
  }
}

Sketch deserialize_sketch(std::span<const std::uint8_t> bytes) {
  wire::Reader in(open_expecting(bytes, SectionTag::Sketch));
  Sketch out;
  out.params = get_params(in);
  const auto len = in.get<std::uint64_t>();
  if (len != out.params.w) throw FormatError("sketch length does not match w");
  out.values = in.get_array<double>(len);
  expect_end(in);
  return out;
}

BlockSketch deserialize_block_sketch(std::span<const std::uint8_t> bytes) {
  wire::Reader in(open_expecting(bytes, SectionTag::BlockSketch));
  BlockSketch out;
  BlockParams& p = out.params;
  for (std::uint64_t* v : {&p.n, &p.b, &p.k, &p.s, &p.t, &p.m, &p.l, &p.seed}) *v = in.get<std::uint64_t>();
  p.eps = in.get<double>();
  p.alpha = in.get<double>();
  if (p.b == 0 || p.m == 0 || p.l == 0 || p.t != (p.n + p.b - 1) / p.b)
    throw FormatError("inconsistent block parameters");
  if (p.m > in.remaining() / 8 || p.b > in.remaining() / 8 / p.m) throw FormatError("truncated stream");
  out.projector = in.get_array<double>(p.m * p.b);
  if (p.m > in.remaining() / 32) throw FormatError("truncated stream");
  for (std::uint64_t i = 0; i < p.m; ++i) {
    PairwiseHash bucket{in.get<std::uint64_t>(), in.get<std::uint64_t>()};
    PairwiseHash sign{in.get<std::uint64_t>(), in.get<std::uint64_t>()};
    out.bucket_hash.push_back(bucket);
    out.sign_hash.push_back(sign);
  }
  if (p.l > in.remaining() / 8 / p.m) throw FormatError("truncated stream");
  out.tables = in.get_array<double>(p.m * p.l);
  expect_end(in);
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace sqs
