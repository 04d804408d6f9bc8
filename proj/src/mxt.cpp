// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/mxt.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "xmodal/errors.hpp"

namespace xmodal::mxt {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'X', 'T', '1'};
// Rank and per-extent limits guard against allocating garbage on corrupt input.
constexpr std::uint32_t kMaxRank = 16;

template <class U>
void put_le(std::ostream& os, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw IoError(std::string("MXT1: truncated ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

std::uint64_t record_size(const Tensor& t) {
  return 4 + 4 + 4 + 8 * t.rank() + 4 * static_cast<std::uint64_t>(t.numel());
}

void write(std::ostream& os, const Tensor& t) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kDtypeF32);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto extent : t.shape()) put_le<std::uint64_t>(os, static_cast<std::uint64_t>(extent));
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  } else {
    for (float v : t.data()) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
  }
  if (!os) throw IoError("MXT1: write failed");
}

Tensor read(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size())) throw IoError("MXT1: truncated header");
  if (magic != kMagic) throw IoError("MXT1: bad magic bytes");
  const auto dtype = get_le<std::uint32_t>(is, "dtype");
  if (dtype != kDtypeF32) throw IoError("MXT1: unsupported dtype code " + std::to_string(dtype));
  const auto rank = get_le<std::uint32_t>(is, "rank");
  if (rank > kMaxRank) throw IoError("MXT1: implausible rank " + std::to_string(rank));
  Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto extent = get_le<std::uint64_t>(is, "extent");
    if (extent == 0 || extent > (std::uint64_t{1} << 40)) throw IoError("MXT1: invalid extent");
    count *= extent;
    if (count > (std::uint64_t{1} << 34)) throw IoError("MXT1: tensor too large");
    shape.push_back(static_cast<std::int64_t>(extent));
  }
  std::vector<float> values(static_cast<std::size_t>(count));
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
      throw IoError("MXT1: truncated payload");
    }
  } else {
    for (auto& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(is, "payload"));
  }
  return Tensor(std::move(shape), std::move(values));
}

void save(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write(os, t);
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return read(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint64_t> save_all(const std::filesystem::path& path, const std::vector<Tensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  std::vector<std::uint64_t> offsets;
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    offsets.push_back(offset);
    write(os, t);
    offset += record_size(t);
  }
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
  return offsets;
}

}  // namespace xmodal::mxt
