#include "frnet/volume_io.hpp"

#include <cstring>
#include <fstream>

#include "frnet/error.hpp"
#include "io_util.hpp"

namespace frnet {

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::real64: return 8;
    case DType::uint8: return 1;
    case DType::complex: return 16;
  }
  throw IoError("unknown dtype code " + std::to_string(static_cast<std::uint32_t>(dtype)));
}

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::real64: return "real64";
    case DType::uint8: return "uint8";
    case DType::complex: return "complex";
  }
  return "unknown";
}

namespace {

std::string encode_header(const Extents& e, DType dtype) {
  std::string out = "FRV1";
  detail::append_le(out, static_cast<std::uint32_t>(e.depth));
  detail::append_le(out, static_cast<std::uint32_t>(e.height));
  detail::append_le(out, static_cast<std::uint32_t>(e.width));
  detail::append_le(out, static_cast<std::uint32_t>(dtype));
  return out;
}

VolumeHeader decode_header(const std::string& bytes, const std::filesystem::path& path) {
  if (bytes.size() < kVolumeHeaderBytes) {
    throw IoError(path.string() + ": truncated header, expected " + std::to_string(kVolumeHeaderBytes) +
                  " bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), "FRV1", 4) != 0) throw IoError(path.string() + ": bad magic, not an FRV1 volume");
  VolumeHeader h;
  h.extents.depth = detail::load_le<std::uint32_t>(bytes.data() + 4);
  h.extents.height = detail::load_le<std::uint32_t>(bytes.data() + 8);
  h.extents.width = detail::load_le<std::uint32_t>(bytes.data() + 12);
  const auto code = detail::load_le<std::uint32_t>(bytes.data() + 16);
  if (code < 1 || code > 3) throw IoError(path.string() + ": unknown dtype code " + std::to_string(code));
  h.dtype = static_cast<DType>(code);
  return h;
}

std::string load_checked(const std::filesystem::path& path, VolumeHeader& header) {
  std::string bytes = detail::read_file(path);
  header = decode_header(bytes, path);
  const std::size_t expected = kVolumeHeaderBytes + header.extents.count() * dtype_size(header.dtype);
  if (bytes.size() != expected) {
    throw IoError(path.string() + ": payload size mismatch, expected " + std::to_string(expected) +
                  " bytes, got " + std::to_string(bytes.size()));
  }
  return bytes;
}

void require_dtype(const VolumeHeader& h, DType want, const std::filesystem::path& path) {
  if (h.dtype != want) {
    throw IoError(path.string() + ": dtype mismatch, expected " + dtype_name(want) + " but file holds " +
                  dtype_name(h.dtype));
  }
}

}  // namespace

void write_volume(const std::filesystem::path& path, const RealVolume& volume) {
  std::string out = encode_header(volume.extents(), DType::real64);
  out.reserve(out.size() + volume.size() * 8);
  for (double v : volume.values()) detail::append_le(out, v);
  detail::write_file_atomic(path, out);
}

void write_volume(const std::filesystem::path& path, const LabelVolume& volume) {
  std::string out = encode_header(volume.extents(), DType::uint8);
  out.append(reinterpret_cast<const char*>(volume.values().data()), volume.size());
  detail::write_file_atomic(path, out);
}

void write_volume(const std::filesystem::path& path, const ComplexVolume& volume) {
  std::string out = encode_header(volume.extents(), DType::complex);
  out.reserve(out.size() + volume.size() * 16);
  for (const auto& v : volume.values()) {
    detail::append_le(out, v.real());
    detail::append_le(out, v.imag());
  }
  detail::write_file_atomic(path, out);
}

VolumeHeader read_volume_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes(kVolumeHeaderBytes, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  bytes.resize(static_cast<std::size_t>(in.gcount()));
  return decode_header(bytes, path);
}

AnyVolume read_volume(const std::filesystem::path& path) {
  VolumeHeader h;
  const std::string bytes = load_checked(path, h);
  const char* p = bytes.data() + kVolumeHeaderBytes;
  const std::size_t n = h.extents.count();
  switch (h.dtype) {
    case DType::real64: {
      RealVolume v(h.extents);
      for (std::size_t i = 0; i < n; ++i) v[i] = detail::load_le<double>(p + 8 * i);
      return v;
    }
    case DType::uint8: {
      LabelVolume v(h.extents);
      std::memcpy(v.values().data(), p, n);
      return v;
    }
    case DType::complex: {
      ComplexVolume v(h.extents);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = {detail::load_le<double>(p + 16 * i), detail::load_le<double>(p + 16 * i + 8)};
      }
      return v;
    }
  }
  throw IoError(path.string() + ": unknown dtype");
}

RealVolume read_real_volume(const std::filesystem::path& path) {
  auto any = read_volume(path);
  if (auto* v = std::get_if<RealVolume>(&any)) return std::move(*v);
  require_dtype(read_volume_header(path), DType::real64, path);
  throw IoError(path.string() + ": not a real volume");
}

LabelVolume read_label_volume(const std::filesystem::path& path) {
  auto any = read_volume(path);
  if (auto* v = std::get_if<LabelVolume>(&any)) return std::move(*v);
  require_dtype(read_volume_header(path), DType::uint8, path);
  throw IoError(path.string() + ": not a label volume");
}

LabelVolume read_binary_mask(const std::filesystem::path& path) {
  LabelVolume mask = read_label_volume(path);
  require_binary(mask, path.string().c_str());
  return mask;
}

ComplexVolume read_complex_volume(const std::filesystem::path& path) {
  auto any = read_volume(path);
  if (auto* v = std::get_if<ComplexVolume>(&any)) return std::move(*v);
  require_dtype(read_volume_header(path), DType::complex, path);
  throw IoError(path.string() + ": not a complex volume");
}

}  // namespace frnet
