#include "tumorfab/tensor_bridge.hpp"

#include "tumorfab/error.hpp"

namespace tumorfab {

torch::Tensor to_tensor(const MriVolume& volume) {
  const Dims3& d = volume.dims();
  auto t = torch::empty({volume.channels(), d.h, d.w, d.d}, torch::kFloat32);
  std::memcpy(t.data_ptr<float>(), volume.data().data(), volume.data().size() * sizeof(float));
  return t;
}

MriVolume volume_from_tensor(const torch::Tensor& tensor, const Geometry& geometry) {
  torch::Tensor t = tensor.detach();
  if (t.dim() == 5) {
    if (t.size(0) != 1) throw ValidationError("volume_from_tensor expects a batch of one");
    t = t.squeeze(0);
  }
  if (t.dim() != 4) throw ValidationError("volume_from_tensor expects a [C, H, W, D] tensor");
  t = t.to(torch::kFloat32).contiguous();
  MriVolume out(t.size(0), {t.size(1), t.size(2), t.size(3)}, geometry);
  std::memcpy(out.data().data(), t.data_ptr<float>(), out.data().size() * sizeof(float));
  return out;
}

torch::Tensor label_tensor(const SegMask& mask) {
  const Dims3& d = mask.dims();
  auto bytes = torch::from_blob(const_cast<uint8_t*>(mask.labels().data()), {d.h, d.w, d.d}, torch::kUInt8);
  return bytes.to(torch::kInt64);
}

torch::Tensor one_hot(const SegMask& mask) {
  validate_labels(mask);
  return torch::one_hot(label_tensor(mask), kLabelCount).permute({3, 0, 1, 2}).to(torch::kFloat32).contiguous();
}

torch::Tensor roi_tensor(const SegMask& mask) { return (label_tensor(mask) > 0).to(torch::kFloat32); }

namespace {

void check_box(const Dims3& dims, const std::array<int64_t, 3>& origin, const Dims3& size) {
  for (int a = 0; a < 3; ++a)
    if (origin[a] < 0 || size[a] < 1 || origin[a] + size[a] > dims[a])
      throw ValidationError("crop box outside volume " + to_string(dims));
}

}  // namespace

MriVolume crop(const MriVolume& volume, const std::array<int64_t, 3>& origin, const Dims3& size) {
  check_box(volume.dims(), origin, size);
  MriVolume out(volume.channels(), size, volume.geometry());
  for (int64_t c = 0; c < volume.channels(); ++c)
    for (int64_t i = 0; i < size.h; ++i)
      for (int64_t j = 0; j < size.w; ++j) {
        const auto src = volume.channel(c).subspan(
            static_cast<size_t>(volume.index(origin[0] + i, origin[1] + j, origin[2])), static_cast<size_t>(size.d));
        std::copy(src.begin(), src.end(), &out.at(c, i, j, 0));
      }
  return out;
}

SegMask crop(const SegMask& mask, const std::array<int64_t, 3>& origin, const Dims3& size) {
  check_box(mask.dims(), origin, size);
  SegMask out(size, mask.geometry());
  for (int64_t i = 0; i < size.h; ++i)
    for (int64_t j = 0; j < size.w; ++j) {
      const uint8_t* src = &mask.labels()[static_cast<size_t>(mask.index(origin[0] + i, origin[1] + j, origin[2]))];
      std::copy(src, src + size.d, &out.labels()[static_cast<size_t>(out.index(i, j, 0))]);
    }
  return out;
}

MriVolume flip(const MriVolume& volume, const std::array<bool, 3>& axes) {
  const Dims3& d = volume.dims();
  MriVolume out(volume.channels(), d, volume.geometry());
  for (int64_t c = 0; c < volume.channels(); ++c)
    for (int64_t i = 0; i < d.h; ++i)
      for (int64_t j = 0; j < d.w; ++j)
        for (int64_t k = 0; k < d.d; ++k)
          out.at(c, axes[0] ? d.h - 1 - i : i, axes[1] ? d.w - 1 - j : j, axes[2] ? d.d - 1 - k : k) =
              volume.at(c, i, j, k);
  return out;
}

SegMask flip(const SegMask& mask, const std::array<bool, 3>& axes) {
  const Dims3& d = mask.dims();
  SegMask out(d, mask.geometry());
  for (int64_t i = 0; i < d.h; ++i)
    for (int64_t j = 0; j < d.w; ++j)
      for (int64_t k = 0; k < d.d; ++k)
        out.at(axes[0] ? d.h - 1 - i : i, axes[1] ? d.w - 1 - j : j, axes[2] ? d.d - 1 - k : k) = mask.at(i, j, k);
  return out;
}

}  // namespace tumorfab
