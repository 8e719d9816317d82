#pragma once

// N-channel same-instance affinity maps aligned to a kernel: ground-truth
// derivation, a seeded corruption model standing in for prediction error,
// an oracle semantic map, and the AFF1 binary format.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "shapeseg/errors.hpp"
#include "shapeseg/kernel.hpp"
#include "shapeseg/raster.hpp"
#include "shapeseg/rng.hpp"

namespace shapeseg {

class AffinityMap {
 public:
  AffinityMap() = default;
  AffinityMap(AffinityKernel kernel, int width, int height)
      : kernel_(std::move(kernel)), width_(width), height_(height),
        values_(kernel_.size() * plane(), 0.0f), valid_(kernel_.size() * plane(), 0) {
    for (std::size_t c = 0; c < kernel_.size(); ++c) {
      const auto o = kernel_.offsets[c];
      for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
          const int nx = x + o.dx, ny = y + o.dy;
          valid_[slot(c, x, y)] = (nx >= 0 && ny >= 0 && nx < width_ && ny < height_) ? 1 : 0;
        }
    }
  }

  const AffinityKernel& kernel() const noexcept { return kernel_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return kernel_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }

  /// Channel-major, then row-major.
  std::size_t slot(std::size_t channel, int x, int y) const noexcept {
    return channel * plane() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  float value(std::size_t channel, int x, int y) const noexcept { return values_[slot(channel, x, y)]; }
  bool valid(std::size_t channel, int x, int y) const noexcept { return valid_[slot(channel, x, y)] != 0; }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<const std::uint8_t> validity() const noexcept { return valid_; }

  bool operator==(const AffinityMap&) const = default;

 private:
  friend AffinityMap read_affinity(std::span<const std::uint8_t>);

  AffinityKernel kernel_;
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
  std::vector<std::uint8_t> valid_;
};

/// value = 1 where the pixel is foreground and its neighbor carries the same
/// label; 0 elsewhere, including every out-of-bounds slot.
inline AffinityMap gt_affinity(const InstanceMap& map, const AffinityKernel& kernel) {
  AffinityMap aff(kernel, map.width(), map.height());
  auto values = aff.values();
  for (std::size_t c = 0; c < kernel.size(); ++c) {
    const auto o = kernel.offsets[c];
    for (int y = 0; y < map.height(); ++y) {
      const int ny = y + o.dy;
      if (ny < 0 || ny >= map.height()) continue;
      for (int x = 0; x < map.width(); ++x) {
        const int nx = x + o.dx;
        if (nx < 0 || nx >= map.width()) continue;
        const auto l = map.labels(x, y);
        if (l != 0 && map.labels(nx, ny) == l) values[aff.slot(c, x, y)] = 1.0f;
      }
    }
  }
  return aff;
}

struct NoiseModel {
  double flip_rate = 0.0;
  double jitter_sd = 0.0;
  std::uint64_t seed = 0;
};

/// Each valid slot flips (v -> 1 - v) with probability flip_rate, then gets
/// clamped Gaussian jitter. Slot s draws only from counter s, so the result
/// does not depend on traversal order. flip_rate == 1 negates every slot.
inline AffinityMap corrupt_affinity(const AffinityMap& aff, const NoiseModel& noise) {
  if (!(noise.flip_rate >= 0.0 && noise.flip_rate <= 1.0)) throw ParameterError("flip_rate must be in [0, 1]");
  if (!(noise.jitter_sd >= 0.0 && std::isfinite(noise.jitter_sd))) throw ParameterError("jitter_sd must be >= 0");
  AffinityMap out = aff;
  if (noise.flip_rate == 0.0 && noise.jitter_sd == 0.0) return out;
  const CounterRng rng(hash_combine(noise.seed, 0xaff1ULL));
  auto values = out.values();
  const auto valid = out.validity();
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (!valid[s]) continue;
    double v = values[s];
    if (noise.flip_rate > 0.0 && rng.uniform(s, 0) < noise.flip_rate) v = 1.0 - v;
    if (noise.jitter_sd > 0.0) v = std::clamp(v + noise.jitter_sd * rng.normal(s, 1), 0.0, 1.0);
    values[s] = static_cast<float>(v);
  }
  return out;
}

/// Oracle semantic map: mass `correct_prob` on the true class (background is
/// class 0), the remainder spread uniformly over the other channels. With
/// `class_flip_rate` > 0 a pixel's true class is replaced by a uniformly drawn
/// other class before the mass is assigned.
inline SemanticMap semantic_from_instances(const InstanceMap& map, double correct_prob, std::uint64_t seed,
                                           double class_flip_rate = 0.0, int channels = 0) {
  ClassId max_class = 0;
  for (const auto& [_, c] : map.classes) max_class = std::max(max_class, c);
  const int c_count = std::max<int>(channels, static_cast<int>(max_class) + 1);
  if (c_count < 2) throw ParameterError("semantic map needs at least two channels");
  if (!(correct_prob > 1.0 / c_count && correct_prob <= 1.0))
    throw ParameterError("correct_prob must be in (1/C, 1]");
  if (!(class_flip_rate >= 0.0 && class_flip_rate <= 1.0)) throw ParameterError("class_flip_rate must be in [0, 1]");

  SemanticMap sem(map.width(), map.height(), c_count);
  const float rest = static_cast<float>((1.0 - correct_prob) / (c_count - 1));
  const CounterRng rng(hash_combine(seed, 0x5e3aULL));
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    const auto id = map.labels[i];
    int truth = id == 0 ? 0 : static_cast<int>(map.classes.at(id));
    if (class_flip_rate > 0.0 && rng.uniform(i, 0) < class_flip_rate) {
      const int shift = 1 + static_cast<int>(rng.bits(i, 1) % static_cast<std::uint64_t>(c_count - 1));
      truth = (truth + shift) % c_count;
    }
    auto p = sem.at(i);
    std::fill(p.begin(), p.end(), rest);
    p[static_cast<std::size_t>(truth)] = static_cast<float>(correct_prob);
  }
  return sem;
}

// ---------------------------------------------------------------------------
// AFF1: magic, u32 N, H, W, N x (i32 dy, i32 dx), N*H*W f32 values,
// N*H*W u8 validity. All integers and floats little-endian.

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  static_assert(sizeof(T) == 4);
  const auto u = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  static_assert(sizeof(T) == 4);
  if (pos + 4 > in.size()) throw FormatError("AFF1 stream truncated");
  std::uint32_t u = 0;
  for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(in[pos + b]) << (8 * b);
  pos += 4;
  return std::bit_cast<T>(u);
}

}  // namespace detail

inline std::vector<std::uint8_t> write_affinity(const AffinityMap& aff) {
  std::vector<std::uint8_t> out{'A', 'F', 'F', '1'};
  const auto n = aff.channels();
  out.reserve(16 + 8 * n + 5 * n * aff.plane());
  detail::put_le(out, static_cast<std::uint32_t>(n));
  detail::put_le(out, static_cast<std::uint32_t>(aff.height()));
  detail::put_le(out, static_cast<std::uint32_t>(aff.width()));
  for (const auto& o : aff.kernel().offsets) {
    detail::put_le(out, static_cast<std::int32_t>(o.dy));
    detail::put_le(out, static_cast<std::int32_t>(o.dx));
  }
  for (const float v : aff.values()) detail::put_le(out, v);
  for (const auto b : aff.validity()) out.push_back(b ? 1 : 0);
  return out;
}

/// Parses AFF1. The kernel's radius is recovered as the ceiling of the
/// largest offset norm; gap is not stored and reads back as 1. The
/// symmetric flag is inferred from closure under negation.
inline AffinityMap read_affinity(std::span<const std::uint8_t> in) {
  if (in.size() < 16 || std::memcmp(in.data(), "AFF1", 4) != 0) throw FormatError("not an AFF1 stream");
  std::size_t pos = 4;
  const auto n = detail::get_le<std::uint32_t>(in, pos);
  const auto h = detail::get_le<std::uint32_t>(in, pos);
  const auto w = detail::get_le<std::uint32_t>(in, pos);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  if (in.size() != 16 + 8ull * n + 5ull * n * plane) throw FormatError("AFF1 size does not match its header");

  AffinityKernel k;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto dy = detail::get_le<std::int32_t>(in, pos);
    const auto dx = detail::get_le<std::int32_t>(in, pos);
    k.offsets.push_back({dy, dx});
  }
  double max_norm = 1.0;
  for (const auto& o : k.offsets) max_norm = std::max(max_norm, o.norm());
  k.radius = static_cast<int>(std::ceil(max_norm - 0.5));
  k.gap = 1;
  const std::set<Offset> lookup(k.offsets.begin(), k.offsets.end());
  k.symmetric = !k.offsets.empty() &&
                std::all_of(k.offsets.begin(), k.offsets.end(), [&](const Offset& o) { return lookup.contains(-o); });
  try {
    k.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("AFF1 kernel invalid: ") + e.what());
  }

  AffinityMap aff;
  aff.kernel_ = std::move(k);
  aff.width_ = static_cast<int>(w);
  aff.height_ = static_cast<int>(h);
  aff.values_.resize(n * plane);
  aff.valid_.resize(n * plane);
  for (auto& v : aff.values_) {
    v = detail::get_le<float>(in, pos);
    if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("AFF1 value outside [0, 1]");
  }
  for (auto& b : aff.valid_) {
    const auto raw = in[pos++];
    if (raw > 1) throw FormatError("AFF1 validity byte must be 0 or 1");
    b = raw;
  }
  return aff;
}

inline void save_affinity(const std::string& path, const AffinityMap& aff) {
  const auto bytes = write_affinity(aff);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path);
}

inline AffinityMap load_affinity(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return read_affinity(bytes);
}

}  // namespace shapeseg
