// Copyright 2026 The Pathforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Binary containers, little-endian throughout.
//
// Dataset (.pfrd):
//   "PFRD" u16 version u16 H u16 W u32 count
//   per sample: u32 template_id, u64 variant_seed, f32 x, f32 y, f32 r,
//               9 bitmaps H x ceil(W/8) bytes, MSB first, in the order
//               5 scene channels, base, target, action path, placement
//
// Checkpoint (.pfwt):
//   "PFWT" u16 version u32 tensor_count
//   per tensor: u16 name_len, name, u8 ndim, u32 dims[ndim], f32 data
//   config: u32 resolution, u32 n_widths, u32 widths[n_widths], u64 seed

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pathforge/pipeline.hpp"

namespace pathforge::io {

static_assert(std::endian::native == std::endian::little, "formats assume a little-endian host");

struct BadMagic : DataError {
  explicit BadMagic(const std::string& w) : DataError("BadMagic", w) {}
};
struct VersionUnsupported : DataError {
  explicit VersionUnsupported(const std::string& w) : DataError("VersionUnsupported", w) {}
};
struct TruncatedFile : DataError {
  TruncatedFile(const std::string& w, long sample = -1)
      : DataError("TruncatedFile", w), sample_index(sample) {}
  long sample_index;  // -1 when the header itself is short
};
struct TrailingBytes : DataError {
  explicit TrailingBytes(const std::string& w) : DataError("TrailingBytes", w) {}
};
struct IoError : DataError {
  explicit IoError(const std::string& w) : DataError("IoError", w) {}
};

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr int kDatasetBitmaps = 9;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 2 + 2 + 2 + 4;
inline constexpr std::size_t kSampleHeaderBytes = 4 + 8 + 3 * 4;

inline std::size_t bitmap_bytes(int h, int w) { return static_cast<std::size_t>(h) * ((w + 7) / 8); }
inline std::size_t sample_bytes(int h, int w) {
  return kSampleHeaderBytes + kDatasetBitmaps * bitmap_bytes(h, w);
}
inline std::size_t dataset_bytes(std::size_t count, int h, int w) {
  return kDatasetHeaderBytes + count * sample_bytes(h, w);
}

using Bytes = std::vector<std::uint8_t>;

namespace detail {

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  Bytes out;
};

class Reader {
 public:
  explicit Reader(const Bytes& b) : b_(b) {}
  bool has(std::size_t n) const { return b_.size() - pos_ >= n; }
  template <class T>
  T get() {
    T v;
    std::memcpy(&v, &b_[pos_], sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    const std::uint8_t* p = &b_[pos_];
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  const Bytes& b_;
  std::size_t pos_ = 0;
};

inline void pack_bitmap(Writer& w, const PathMap& m) {
  const std::size_t row_bytes = (m.width + 7) / 8;
  for (int r = 0; r < m.height; ++r) {
    std::vector<std::uint8_t> row(row_bytes, 0);
    for (int c = 0; c < m.width; ++c)
      if (m.at(r, c) > 0.5f) row[c / 8] |= static_cast<std::uint8_t>(0x80u >> (c % 8));
    w.put_bytes(row.data(), row.size());
  }
}

inline PathMap unpack_bitmap(const std::uint8_t* p, int h, int w) {
  PathMap m(h, w);
  const std::size_t row_bytes = (w + 7) / 8;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      m.at(r, c) = (p[r * row_bytes + c / 8] & (0x80u >> (c % 8))) ? 1.0f : 0.0f;
  return m;
}

inline void check_magic(Reader& r, const char (&magic)[5], const std::string& what) {
  if (!r.has(4)) throw TruncatedFile(what + ": header is incomplete");
  const auto* p = r.take(4);
  if (std::memcmp(p, magic, 4) != 0) throw BadMagic(what + ": expected magic " + magic);
}

}  // namespace detail

inline Bytes read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(f), {});
}

inline void write_file(const std::string& path, const Bytes& b) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!f) throw IoError("short write to " + path);
}

// ---------------------------------------------------------------------------
// Dataset

inline Bytes encode_dataset(std::span<const TrainSample> samples) {
  const int h = samples.empty() ? kDefaultResolution : samples[0].scene.resolution;
  detail::Writer w;
  w.put_bytes("PFRD", 4);
  w.put<std::uint16_t>(kDatasetVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(h));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(h));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(samples.size()));
  for (const auto& s : samples) {
    if (s.scene.resolution != h) throw ShapeMismatch("dataset samples must share one resolution");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.template_id));
    w.put<std::uint64_t>(s.variant_seed);
    w.put<float>(static_cast<float>(s.action.x));
    w.put<float>(static_cast<float>(s.action.y));
    w.put<float>(static_cast<float>(s.action.r));
    for (const auto& c : s.scene.channels) detail::pack_bitmap(w, c);
    for (const PathMap* m : {&s.gt_base, &s.gt_target, &s.gt_action, &s.gt_placement}) {
      if (m->height != h || m->width != h) throw ShapeMismatch("dataset map size mismatch");
      detail::pack_bitmap(w, *m);
    }
  }
  return std::move(w.out);
}

// Actions are stored as f32; decoded samples carry the widened values.
inline std::vector<TrainSample> decode_dataset(const Bytes& bytes) {
  detail::Reader r(bytes);
  detail::check_magic(r, "PFRD", "dataset");
  if (!r.has(10)) throw TruncatedFile("dataset: header is incomplete");
  const auto version = r.get<std::uint16_t>();
  if (version != kDatasetVersion)
    throw VersionUnsupported("dataset version " + std::to_string(version));
  const int h = r.get<std::uint16_t>(), w = r.get<std::uint16_t>();
  const auto count = r.get<std::uint32_t>();
  if (h != w) throw ShapeMismatch("dataset maps must be square");
  check_resolution(h);
  std::vector<TrainSample> out;
  out.reserve(count);
  const std::size_t per_map = bitmap_bytes(h, w);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!r.has(sample_bytes(h, w)))
      throw TruncatedFile("dataset ends inside sample " + std::to_string(i), i);
    TrainSample s;
    s.template_id = static_cast<int>(r.get<std::uint32_t>());
    s.variant_seed = r.get<std::uint64_t>();
    s.action.x = r.get<float>();
    s.action.y = r.get<float>();
    s.action.r = r.get<float>();
    s.scene.resolution = h;
    for (auto& c : s.scene.channels) c = detail::unpack_bitmap(r.take(per_map), h, w);
    for (PathMap* m : {&s.gt_base, &s.gt_target, &s.gt_action, &s.gt_placement})
      *m = detail::unpack_bitmap(r.take(per_map), h, w);
    out.push_back(std::move(s));
  }
  if (r.remaining() != 0)
    throw TrailingBytes(std::to_string(r.remaining()) + " bytes after the last sample");
  return out;
}

inline void save_dataset(const std::string& path, std::span<const TrainSample> samples) {
  write_file(path, encode_dataset(samples));
}
inline std::vector<TrainSample> load_dataset(const std::string& path) {
  return decode_dataset(read_file(path));
}

// ---------------------------------------------------------------------------
// Checkpoint

inline Bytes encode_checkpoint(Model& m) {
  detail::Writer w;
  w.put_bytes("PFWT", 4);
  w.put<std::uint16_t>(kCheckpointVersion);
  const auto params = m.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p->name.size()));
    w.put_bytes(p->name.data(), p->name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p->value.ndim()));
    for (int d : p->value.shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_bytes(p->value.data.data(), p->value.size() * sizeof(float));
  }
  const auto widths = m.config.down_widths();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.config.resolution));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(widths.size()));
  for (int x : widths) w.put<std::uint32_t>(static_cast<std::uint32_t>(x));
  w.put<std::uint64_t>(m.config.seed);
  return std::move(w.out);
}

// If `expected` is given its resolution must match the stored config.
inline Model decode_checkpoint(const Bytes& bytes, const ModelConfig* expected = nullptr) {
  detail::Reader r(bytes);
  detail::check_magic(r, "PFWT", "checkpoint");
  auto need = [&](std::size_t n) {
    if (!r.has(n)) throw TruncatedFile("checkpoint ends early");
  };
  need(6);
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion)
    throw VersionUnsupported("checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  struct Stored {
    std::string name;
    nn::Shape shape;
    const std::uint8_t* data;
  };
  std::vector<Stored> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    need(2);
    const auto len = r.get<std::uint16_t>();
    need(len + 1u);
    Stored s;
    s.name.assign(reinterpret_cast<const char*>(r.take(len)), len);
    const auto nd = r.get<std::uint8_t>();
    need(4u * nd);
    for (int d = 0; d < nd; ++d) s.shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
    const std::size_t n = nn::shape_size(s.shape) * sizeof(float);
    need(n);
    s.data = r.take(n);
    tensors.push_back(std::move(s));
  }
  need(8);
  ModelConfig cfg;
  cfg.resolution = static_cast<int>(r.get<std::uint32_t>());
  const auto nw = r.get<std::uint32_t>();
  need(4u * nw + 8);
  std::vector<int> widths;
  for (std::uint32_t i = 0; i < nw; ++i) widths.push_back(static_cast<int>(r.get<std::uint32_t>()));
  cfg.seed = r.get<std::uint64_t>();
  if (r.remaining() != 0) throw TrailingBytes("bytes after the checkpoint config");
  if (!widths.empty()) cfg.base_width = widths[0];

  if (expected && expected->resolution != cfg.resolution)
    throw ShapeMismatch("checkpoint resolution " + std::to_string(cfg.resolution) +
                        " does not match configured " + std::to_string(expected->resolution));
  check_resolution(cfg.resolution);
  if (cfg.down_widths() != widths) throw ShapeMismatch("checkpoint channel widths are not supported");

  Model m(cfg);
  const auto params = m.parameters();
  if (params.size() != tensors.size())
    throw ShapeMismatch("checkpoint has " + std::to_string(tensors.size()) + " tensors, model " +
                        std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].name != params[i]->name || tensors[i].shape != params[i]->value.shape)
      throw ShapeMismatch("checkpoint tensor " + tensors[i].name + nn::shape_str(tensors[i].shape) +
                          " vs model " + params[i]->name + nn::shape_str(params[i]->value.shape));
    std::memcpy(params[i]->value.data.data(), tensors[i].data, params[i]->value.size() * sizeof(float));
  }
  return m;
}

inline void save_checkpoint(const std::string& path, Model& m) {
  write_file(path, encode_checkpoint(m));
}
inline Model load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr) {
  return decode_checkpoint(read_file(path), expected);
}

}  // namespace pathforge::io
