#include "tumorfab/nifti_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <memory>

#include "tumorfab/error.hpp"

namespace tumorfab {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax;
  int32_t glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code;
  int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348);

enum : int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

struct GzCloser {
  void operator()(gzFile f) const {
    if (f) gzclose(f);
  }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

bool has_gz_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

struct RawImage {
  Nifti1Header header{};
  Dims3 dims;
  int64_t channels = 1;
  std::vector<char> payload;
};

int bytes_per_voxel(int16_t datatype) {
  switch (datatype) {
    case kUint8:
    case kInt8: return 1;
    case kInt16:
    case kUint16: return 2;
    case kInt32:
    case kUint32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

RawImage read_raw(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  GzHandle file(gzopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());

  RawImage raw;
  if (gzread(file.get(), &raw.header, sizeof(Nifti1Header)) != static_cast<int>(sizeof(Nifti1Header)))
    throw IoError("truncated NIfTI header: " + path.string());
  const auto& h = raw.header;
  if (h.sizeof_hdr != 348) {
    int32_t swapped = 0;
    const auto* b = reinterpret_cast<const unsigned char*>(&h.sizeof_hdr);
    swapped = (b[0] << 24) | (b[1] << 16) | (b[2] << 8) | b[3];
    if (swapped == 348) throw IoError("big-endian NIfTI is not supported: " + path.string());
    throw IoError("malformed NIfTI header (sizeof_hdr != 348): " + path.string());
  }
  if (std::memcmp(h.magic, "n+1", 4) != 0 && std::memcmp(h.magic, "ni1", 4) != 0)
    throw IoError("malformed NIfTI header (bad magic): " + path.string());
  if (std::memcmp(h.magic, "ni1", 4) == 0) throw IoError("split .hdr/.img NIfTI pairs are not supported: " + path.string());

  const int ndim = h.dim[0];
  if (ndim != 3 && ndim != 4)
    throw ValidationError("expected a 3D or 4D payload, got " + std::to_string(ndim) + "D: " + path.string());
  for (int a = 1; a <= ndim; ++a)
    if (h.dim[a] < 1) throw IoError("malformed NIfTI header (non-positive dim): " + path.string());
  raw.dims = {h.dim[1], h.dim[2], h.dim[3]};
  raw.channels = ndim == 4 ? h.dim[4] : 1;

  const int bpv = bytes_per_voxel(h.datatype);
  if (bpv == 0) throw IoError("unsupported NIfTI datatype " + std::to_string(h.datatype) + ": " + path.string());

  const auto offset = static_cast<int64_t>(h.vox_offset);
  if (offset < 348) throw IoError("malformed NIfTI header (vox_offset < 348): " + path.string());
  std::vector<char> skip(static_cast<size_t>(offset - 348));
  if (!skip.empty() && gzread(file.get(), skip.data(), static_cast<unsigned>(skip.size())) != static_cast<int>(skip.size()))
    throw IoError("truncated NIfTI extension block: " + path.string());

  const size_t total = static_cast<size_t>(raw.channels * raw.dims.voxels() * bpv);
  raw.payload.resize(total);
  size_t done = 0;
  while (done < total) {
    const auto chunk = static_cast<unsigned>(std::min<size_t>(total - done, 1u << 30));
    const int got = gzread(file.get(), raw.payload.data() + done, chunk);
    if (got <= 0) throw IoError("truncated NIfTI payload: " + path.string());
    done += static_cast<size_t>(got);
  }
  return raw;
}

template <typename T>
double read_as(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<double>(v);
}

double decode_voxel(const char* p, int16_t datatype) {
  switch (datatype) {
    case kUint8: return read_as<uint8_t>(p);
    case kInt8: return read_as<int8_t>(p);
    case kInt16: return read_as<int16_t>(p);
    case kUint16: return read_as<uint16_t>(p);
    case kInt32: return read_as<int32_t>(p);
    case kUint32: return read_as<uint32_t>(p);
    case kFloat32: return read_as<float>(p);
    case kFloat64: return read_as<double>(p);
    default: return 0.0;
  }
}

Geometry geometry_from_header(const Nifti1Header& h) {
  Geometry g;
  for (int a = 0; a < 3; ++a) g.spacing[a] = h.pixdim[a + 1];
  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      g.affine[0][c] = h.srow_x[c];
      g.affine[1][c] = h.srow_y[c];
      g.affine[2][c] = h.srow_z[c];
    }
  } else if (h.qform_code > 0) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
    const double r[3][3] = {{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
                            {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
                            {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
    const double s[3] = {h.pixdim[1], h.pixdim[2], h.pixdim[3] * qfac};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g.affine[i][j] = static_cast<float>(r[i][j] * s[j]);
    g.affine[0][3] = h.qoffset_x;
    g.affine[1][3] = h.qoffset_y;
    g.affine[2][3] = h.qoffset_z;
  } else {
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 4; ++c) g.affine[a][c] = (a == c) ? g.spacing[a] : 0.0f;
  }
  g.affine[3] = {0.0f, 0.0f, 0.0f, 1.0f};
  return g;
}

Nifti1Header make_header(const Dims3& dims, int64_t channels, const Geometry& g, int16_t datatype, int16_t bitpix) {
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = channels > 1 ? 4 : 3;
  h.dim[1] = static_cast<int16_t>(dims.h);
  h.dim[2] = static_cast<int16_t>(dims.w);
  h.dim[3] = static_cast<int16_t>(dims.d);
  h.dim[4] = static_cast<int16_t>(channels);
  for (int a = 5; a < 8; ++a) h.dim[a] = 1;
  h.datatype = datatype;
  h.bitpix = bitpix;
  h.pixdim[0] = 1.0f;
  for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = g.spacing[a];
  h.pixdim[4] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // millimeters
  h.sform_code = 2;
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = g.affine[0][c];
    h.srow_y[c] = g.affine[1][c];
    h.srow_z[c] = g.affine[2][c];
  }
  std::strncpy(h.descrip, "tumorfab", sizeof(h.descrip) - 1);
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

void check_dims_fit(const Dims3& dims, int64_t channels, const std::filesystem::path& path) {
  constexpr int64_t kMax = 32767;
  if (dims.h > kMax || dims.w > kMax || dims.d > kMax || channels > kMax)
    throw ValidationError("volume too large for a NIfTI-1 header: " + path.string());
}

void write_file(const std::filesystem::path& path, const Nifti1Header& header, const char* payload, size_t bytes) {
  const char extension[4] = {0, 0, 0, 0};
  if (has_gz_suffix(path)) {
    GzHandle file(gzopen(path.c_str(), "wb6"));
    if (!file) throw IoError("cannot write " + path.string());
    bool ok = gzwrite(file.get(), &header, sizeof(header)) == static_cast<int>(sizeof(header)) &&
              gzwrite(file.get(), extension, 4) == 4;
    size_t done = 0;
    while (ok && done < bytes) {
      const auto chunk = static_cast<unsigned>(std::min<size_t>(bytes - done, 1u << 30));
      ok = gzwrite(file.get(), payload + done, chunk) == static_cast<int>(chunk);
      done += chunk;
    }
    if (!ok) throw IoError("write failed: " + path.string());
    if (gzclose(file.release()) != Z_OK) throw IoError("write failed: " + path.string());
    return;
  }
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw IoError("cannot write " + path.string());
  bool ok = std::fwrite(&header, sizeof(header), 1, file.get()) == 1 && std::fwrite(extension, 1, 4, file.get()) == 4;
  ok = ok && std::fwrite(payload, 1, bytes, file.get()) == bytes;
  if (!ok || std::fclose(file.release()) != 0) throw IoError("write failed: " + path.string());
}

}  // namespace

MriVolume load_volume(const std::filesystem::path& path) {
  const RawImage raw = read_raw(path);
  const auto& h = raw.header;
  MriVolume vol(raw.channels, raw.dims, geometry_from_header(h));
  const int bpv = bytes_per_voxel(h.datatype);
  const bool scaled = h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
  const Dims3& d = raw.dims;
  const char* p = raw.payload.data();
  // File order is i-fastest; memory order is k-fastest.
  for (int64_t c = 0; c < raw.channels; ++c)
    for (int64_t k = 0; k < d.d; ++k)
      for (int64_t j = 0; j < d.w; ++j)
        for (int64_t i = 0; i < d.h; ++i, p += bpv) {
          double v = decode_voxel(p, h.datatype);
          if (scaled) v = v * h.scl_slope + h.scl_inter;
          vol.at(c, i, j, k) = static_cast<float>(v);
        }
  for (float v : vol.data())
    if (!std::isfinite(v)) throw ValidationError("non-finite voxel value in " + path.string());
  return vol;
}

void save_volume(const MriVolume& volume, const std::filesystem::path& path) {
  check_dims_fit(volume.dims(), volume.channels(), path);
  const Nifti1Header header = make_header(volume.dims(), volume.channels(), volume.geometry(), kFloat32, 32);
  const Dims3& d = volume.dims();
  std::vector<float> out(volume.data().size());
  size_t n = 0;
  for (int64_t c = 0; c < volume.channels(); ++c)
    for (int64_t k = 0; k < d.d; ++k)
      for (int64_t j = 0; j < d.w; ++j)
        for (int64_t i = 0; i < d.h; ++i) out[n++] = volume.at(c, i, j, k);
  write_file(path, header, reinterpret_cast<const char*>(out.data()), out.size() * sizeof(float));
}

SegMask load_mask(const std::filesystem::path& path) {
  const RawImage raw = read_raw(path);
  if (raw.channels != 1) throw ValidationError("label volume must have a single channel: " + path.string());
  const auto& h = raw.header;
  SegMask mask(raw.dims, geometry_from_header(h));
  const int bpv = bytes_per_voxel(h.datatype);
  const Dims3& d = raw.dims;
  const char* p = raw.payload.data();
  for (int64_t k = 0; k < d.d; ++k)
    for (int64_t j = 0; j < d.w; ++j)
      for (int64_t i = 0; i < d.h; ++i, p += bpv) {
        const double v = decode_voxel(p, h.datatype);
        const double r = std::nearbyint(v);
        if (r != v || r < 0 || r >= kLabelCount)
          throw ValidationError("label value " + std::to_string(v) + " outside {0,1,2,3} in " + path.string());
        mask.at(i, j, k) = static_cast<uint8_t>(r);
      }
  return mask;
}

void save_mask(const SegMask& mask, const std::filesystem::path& path) {
  check_dims_fit(mask.dims(), 1, path);
  const Nifti1Header header = make_header(mask.dims(), 1, mask.geometry(), kUint8, 8);
  const Dims3& d = mask.dims();
  std::vector<uint8_t> out(mask.labels().size());
  size_t n = 0;
  for (int64_t k = 0; k < d.d; ++k)
    for (int64_t j = 0; j < d.w; ++j)
      for (int64_t i = 0; i < d.h; ++i) out[n++] = mask.at(i, j, k);
  write_file(path, header, reinterpret_cast<const char*>(out.data()), out.size());
}

}  // namespace tumorfab
