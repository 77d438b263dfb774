// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include "med3d/error.hpp"

namespace med3d::nifti {
namespace {

// NIfTI-1 header field offsets.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

constexpr std::string_view kModalityTag = "med3d modality=";

template <typename T>
T byteswap_value(T v) {
  std::array<unsigned char, sizeof(T)> raw;
  std::memcpy(raw.data(), &v, sizeof(T));
  std::reverse(raw.begin(), raw.end());
  std::memcpy(&v, raw.data(), sizeof(T));
  return v;
}

class HeaderView {
 public:
  HeaderView(std::span<const std::byte> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(std::size_t offset) const {
    T v;
    std::memcpy(&v, bytes_.data() + offset, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

 private:
  std::span<const std::byte> bytes_;
  bool swap_;
};

int bytes_per_voxel(Dtype t) {
  switch (t) {
    case Dtype::kUInt8: return 1;
    case Dtype::kInt16: return 2;
    case Dtype::kInt32: return 4;
    case Dtype::kFloat32: return 4;
    case Dtype::kFloat64: return 8;
  }
  return 0;
}

std::optional<Dtype> to_dtype(short code) {
  switch (code) {
    case 2: return Dtype::kUInt8;
    case 4: return Dtype::kInt16;
    case 8: return Dtype::kInt32;
    case 16: return Dtype::kFloat32;
    case 64: return Dtype::kFloat64;
    default: return std::nullopt;
  }
}

template <typename Raw>
double decode_one(const std::byte* p, bool swap) {
  Raw v;
  std::memcpy(&v, p, sizeof(Raw));
  if (swap) v = byteswap_value(v);
  return static_cast<double>(v);
}

double decode_voxel(Dtype t, const std::byte* p, bool swap) {
  switch (t) {
    case Dtype::kUInt8: return decode_one<std::uint8_t>(p, swap);
    case Dtype::kInt16: return decode_one<std::int16_t>(p, swap);
    case Dtype::kInt32: return decode_one<std::int32_t>(p, swap);
    case Dtype::kFloat32: return decode_one<float>(p, swap);
    case Dtype::kFloat64: return decode_one<double>(p, swap);
  }
  return 0.0;
}

Modality modality_from_descrip(std::span<const std::byte> bytes) {
  const char* text = reinterpret_cast<const char*>(bytes.data() + kOffDescrip);
  const std::string_view descrip(text, strnlen(text, 80));
  if (!descrip.starts_with(kModalityTag)) return Modality::kUnknown;
  return parse_modality(descrip.substr(kModalityTag.size())).value_or(Modality::kUnknown);
}

std::vector<std::byte> slurp(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::byte> out;
  std::array<std::byte, 1 << 16> chunk;
  for (;;) {
    const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      gzclose(f);
      fail(ErrorCode::kTruncatedFile, "corrupt compressed stream in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(f);
  return out;
}

template <typename T>
void put(std::vector<std::byte>& buf, std::size_t offset, T v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
  std::memcpy(buf.data() + offset, &v, sizeof(T));
}

}  // namespace

ReadResult parse(std::span<const std::byte> bytes) {
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
    fail(ErrorCode::kTruncatedFile, "file shorter than the 348-byte header");
  }
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), sizeof sizeof_hdr);
  bool swap = false;
  if (sizeof_hdr != kHeaderSize) {
    if (byteswap_value(sizeof_hdr) != kHeaderSize) {
      fail(ErrorCode::kBadMagic, "sizeof_hdr is not 348 in either byte order");
    }
    swap = true;
  }
  const char* magic = reinterpret_cast<const char*>(bytes.data() + kOffMagic);
  if (std::memcmp(magic, "n+1\0", 4) != 0) {
    if (std::memcmp(magic, "ni1\0", 4) == 0) {
      fail(ErrorCode::kBadMagic, "paired .hdr/.img NIfTI is not supported");
    }
    fail(ErrorCode::kBadMagic, "magic is not \"n+1\"");
  }

  const HeaderView h(bytes, swap);
  const short ndim = h.get<short>(kOffDim);
  if (ndim < 1 || ndim > 7) fail(ErrorCode::kInvalidDimensions, "dim[0] out of range");
  std::array<int, 3> n{1, 1, 1};
  for (int i = 1; i <= ndim; ++i) {
    const short d = h.get<short>(kOffDim + 2 * static_cast<std::size_t>(i));
    if (d < 1) fail(ErrorCode::kInvalidDimensions, "non-positive dim[" + std::to_string(i) + "]");
    if (i <= 3) {
      n[static_cast<std::size_t>(i - 1)] = d;
    } else if (d != 1) {
      fail(ErrorCode::kInvalidDimensions, "volumes with more than three dimensions are not supported");
    }
  }

  const auto dtype = to_dtype(h.get<short>(kOffDatatype));
  if (!dtype) {
    fail(ErrorCode::kUnsupportedDtype, "datatype code " + std::to_string(h.get<short>(kOffDatatype)));
  }
  const int bpv = bytes_per_voxel(*dtype);
  if (h.get<short>(kOffBitpix) != 8 * bpv) {
    fail(ErrorCode::kUnsupportedDtype, "bitpix disagrees with datatype");
  }

  Spacing3 spacing{};
  for (int a = 0; a < 3; ++a) {
    const float p = h.get<float>(kOffPixdim + 4 * static_cast<std::size_t>(a + 1));
    if (!std::isfinite(p) || p <= 0.0f) {
      fail(ErrorCode::kNonPositiveSpacing, "pixdim[" + std::to_string(a + 1) + "] is not positive");
    }
    spacing[static_cast<std::size_t>(a)] = p;
  }

  const float vox_offset = h.get<float>(kOffVoxOffset);
  if (!std::isfinite(vox_offset) || vox_offset < static_cast<float>(kHeaderSize) ||
      vox_offset > 1.0e9f) {
    fail(ErrorCode::kInvalidDimensions, "vox_offset out of range");
  }
  const auto offset = static_cast<std::uint64_t>(vox_offset);
  const Extent3 extent{n[0], n[1], n[2]};
  const std::uint64_t needed = offset + static_cast<std::uint64_t>(extent.count()) *
                                            static_cast<std::uint64_t>(bpv);
  if (needed > bytes.size()) {
    fail(ErrorCode::kTruncatedFile, "expected " + std::to_string(needed) + " bytes, found " +
                                        std::to_string(bytes.size()));
  }

  const float slope = h.get<float>(kOffSclSlope);
  const float inter = h.get<float>(kOffSclInter);
  const bool scaled = std::isfinite(slope) && slope != 0.0f && std::isfinite(inter) &&
                      !(slope == 1.0f && inter == 0.0f);

  std::vector<float> voxels(extent.count());
  bool integral = true;
  double max_value = 0.0;
  const std::byte* p = bytes.data() + offset;
  for (std::size_t i = 0; i < voxels.size(); ++i, p += bpv) {
    double v = decode_voxel(*dtype, p, swap);
    if (scaled) v = static_cast<double>(slope) * v + static_cast<double>(inter);
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) fail(ErrorCode::kNonFiniteVoxel, "voxel " + std::to_string(i));
    voxels[i] = f;
    if (integral && (f < 0.0f || f != std::floor(f) || f > 255.0f)) integral = false;
    max_value = std::max(max_value, static_cast<double>(f));
  }

  std::array<double, 3> origin{};
  for (int a = 0; a < 3; ++a) {
    const float o = h.get<float>(kOffQoffset + 4 * static_cast<std::size_t>(a));
    origin[static_cast<std::size_t>(a)] = std::isfinite(o) ? o : 0.0;
  }

  Volume vol(extent, spacing, std::move(voxels), modality_from_descrip(bytes), origin);
  std::optional<LabelGrid> labels;
  if (integral) labels = to_label_grid(vol, static_cast<int>(max_value) + 1);
  return ReadResult{std::move(vol), std::move(labels)};
}

ReadResult read(const std::filesystem::path& path) {
  const std::vector<std::byte> bytes = slurp(path);
  return parse(bytes);
}

std::vector<std::byte> encode(const Volume& vol) {
  const Extent3& e = vol.extent();
  require(e.nx <= 32767 && e.ny <= 32767 && e.nz <= 32767, ErrorCode::kInvalidDimensions,
          "extent exceeds the NIfTI-1 int16 limit");
  std::vector<std::byte> buf(kDataOffset + 4 * e.count(), std::byte{0});
  put<std::int32_t>(buf, 0, kHeaderSize);
  buf[38] = std::byte{'r'};
  const short dims[8] = {3, static_cast<short>(e.nx), static_cast<short>(e.ny),
                         static_cast<short>(e.nz), 1, 1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) put<short>(buf, kOffDim + 2 * i, dims[i]);
  put<short>(buf, kOffDatatype, static_cast<short>(Dtype::kFloat32));
  put<short>(buf, kOffBitpix, 32);
  put<float>(buf, kOffPixdim, 1.0f);
  for (std::size_t a = 0; a < 3; ++a) {
    put<float>(buf, kOffPixdim + 4 * (a + 1), static_cast<float>(vol.spacing()[a]));
  }
  put<float>(buf, kOffVoxOffset, static_cast<float>(kDataOffset));
  put<float>(buf, kOffSclSlope, 1.0f);
  put<float>(buf, kOffSclInter, 0.0f);
  buf[kOffXyztUnits] = std::byte{2};  // NIFTI_UNITS_MM

  std::string descrip(kModalityTag);
  descrip += modality_name(vol.modality());
  std::memcpy(buf.data() + kOffDescrip, descrip.data(), descrip.size());

  put<short>(buf, kOffQformCode, 1);
  for (std::size_t a = 0; a < 3; ++a) {
    put<float>(buf, kOffQoffset + 4 * a, static_cast<float>(vol.origin_offset()[a]));
  }
  for (std::size_t r = 0; r < 3; ++r) {
    put<float>(buf, kOffSrow + 16 * r + 4 * r, static_cast<float>(vol.spacing()[r]));
    put<float>(buf, kOffSrow + 16 * r + 12, static_cast<float>(vol.origin_offset()[r]));
  }
  std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);

  std::size_t off = kDataOffset;
  for (float v : vol.voxels()) {
    put<float>(buf, off, v);
    off += 4;
  }
  return buf;
}

void write(const Volume& vol, const std::filesystem::path& path) {
  const std::vector<std::byte> buf = encode(vol);
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "wb6");
    if (f == nullptr) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
    const int n = gzwrite(f, buf.data(), static_cast<unsigned>(buf.size()));
    const int rc = gzclose(f);
    if (n != static_cast<int>(buf.size()) || rc != Z_OK) {
      fail(ErrorCode::kIoFailure, "short write to " + path.string());
    }
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace med3d::nifti
