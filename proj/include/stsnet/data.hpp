// Copyright 2026 The stsnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STSNET_DATA_HPP_
#define STSNET_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stsnet/tensor.hpp"

namespace stsnet {

// ---------------------------------------------------------------------------
// MNIST IDX files. Headers are big-endian; magics 0x00000803 (images) and
// 0x00000801 (labels).

struct MnistImages {
  std::vector<Tensor<float>> images;  // [H x W], values in [0,1]
  std::vector<uint8_t> labels;
  int rows = 28, cols = 28;

  int64_t size() const { return static_cast<int64_t>(images.size()); }
};

namespace idx {

inline uint32_t read_u32_be(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return (static_cast<uint32_t>(b[0]) << 24) |
         (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

inline void write_u32_be(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace idx

inline MnistImages load_mnist(const std::string& images_path,
                              const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw path_error("cannot open " + images_path);
  const uint32_t magic_i = idx::read_u32_be(imgs);
  if (!imgs || magic_i != 0x00000803u)
    throw format_error(images_path + ": bad image magic (want 0x00000803)");
  const uint32_t count = idx::read_u32_be(imgs);
  const uint32_t rows = idx::read_u32_be(imgs);
  const uint32_t cols = idx::read_u32_be(imgs);
  if (!imgs || rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
    throw format_error(images_path + ": bad image header");

  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw path_error("cannot open " + labels_path);
  const uint32_t magic_l = idx::read_u32_be(lbls);
  if (!lbls || magic_l != 0x00000801u)
    throw format_error(labels_path + ": bad label magic (want 0x00000801)");
  const uint32_t count_l = idx::read_u32_be(lbls);
  if (count_l != count)
    throw format_error(labels_path + ": label count " + std::to_string(count_l) +
                       " != image count " + std::to_string(count));

  MnistImages out;
  out.rows = static_cast<int>(rows);
  out.cols = static_cast<int>(cols);
  out.images.reserve(count);
  out.labels.resize(count);
  lbls.read(reinterpret_cast<char*>(out.labels.data()), count);
  if (!lbls) throw format_error(labels_path + ": truncated label data");

  const int64_t px = static_cast<int64_t>(rows) * cols;
  std::vector<unsigned char> buf(static_cast<size_t>(px));
  for (uint32_t i = 0; i < count; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), px);
    if (!imgs) throw format_error(images_path + ": truncated image data at " +
                                  std::to_string(i));
    Tensor<float> img({static_cast<int>(rows), static_cast<int>(cols)});
    for (int64_t j = 0; j < px; ++j)
      img[j] = static_cast<float>(buf[static_cast<size_t>(j)]) / 255.0f;
    out.images.push_back(std::move(img));
  }
  return out;
}

inline void write_idx_images(const std::string& path,
                             const std::vector<Tensor<float>>& images) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw path_error("cannot write " + path);
  idx::write_u32_be(os, 0x00000803u);
  idx::write_u32_be(os, static_cast<uint32_t>(images.size()));
  idx::write_u32_be(os, images.empty() ? 28 : static_cast<uint32_t>(images[0].dim(0)));
  idx::write_u32_be(os, images.empty() ? 28 : static_cast<uint32_t>(images[0].dim(1)));
  for (const auto& img : images)
    for (int64_t i = 0; i < img.size(); ++i) {
      const int v = static_cast<int>(std::lround(img[i] * 255.0f));
      os.put(static_cast<char>(std::clamp(v, 0, 255)));
    }
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<uint8_t>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw path_error("cannot write " + path);
  idx::write_u32_be(os, 0x00000801u);
  idx::write_u32_be(os, static_cast<uint32_t>(labels.size()));
  os.write(reinterpret_cast<const char*>(labels.data()),
           static_cast<std::streamsize>(labels.size()));
}

// ---------------------------------------------------------------------------
// Bilinear warps about the image center, zero background.

// dst(y,x) samples src at center + M . (dst - center).
inline Tensor<float> warp_bilinear(const Tensor<float>& img, double m00,
                                   double m01, double m10, double m11) {
  const int h = img.dim(0), w = img.dim(1);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  Tensor<float> out({h, w});
  for (int y = 0; y < h; ++y) {
    const double dy = y - cy;
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx;
      const double sy = cy + m10 * dx + m11 * dy;
      const double sx = cx + m00 * dx + m01 * dy;
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const double fy = sy - y0, fx = sx - x0;
      auto px = [&](int yy, int xx) -> double {
        return (yy >= 0 && yy < h && xx >= 0 && xx < w)
                   ? static_cast<double>(img[static_cast<int64_t>(yy) * w + xx])
                   : 0.0;
      };
      const double v = (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                       fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
      out[static_cast<int64_t>(y) * w + x] = static_cast<float>(v);
    }
  }
  return out;
}

inline Tensor<float> scale_image(const Tensor<float>& img, double s) {
  return warp_bilinear(img, 1.0 / s, 0.0, 0.0, 1.0 / s);
}

// Positive degrees rotate clockwise in image coordinates (y down).
inline Tensor<float> rotate_image(const Tensor<float>& img, double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  return warp_bilinear(img, c, -s, s, c);
}

// ---------------------------------------------------------------------------
// The five synthetic spatio-temporal sequences plus the static case (seq 0).

struct SampleMeta {
  int seq_id = 0;
  int digit = 0;
  int variant = 0;  // 0 = a, 1 = b
  uint64_t sample_index = 0;
  double angle = 0.0;  // seq5: the per-sample total rotation
};

struct SequenceSample {
  Tensor<float> frames;  // [window x C x H x W], values in [0,1]
  int label = 0;
  SampleMeta meta;
};

inline int sequence_num_classes(int seq_id) {
  switch (seq_id) {
    case 0:
    case 4:
      return 10;
    case 1:
    case 2:
    case 3:
    case 5:
      return 20;
    case 6:  // event-derived digits
      return 10;
    default:
      throw parameter_error("unknown sequence id " + std::to_string(seq_id));
  }
}

// Builds one sample of sequences 1-5 from a base image. Variant b of the
// zoom sequences is the exact frame-reversal of variant a; rotations flip
// direction instead.
inline SequenceSample gen_sequence(int seq_id, const Tensor<float>& image,
                                   int digit, int variant, Rng& rng,
                                   int window = 10) {
  if (seq_id < 1 || seq_id > 5)
    throw parameter_error("gen_sequence: seq id " + std::to_string(seq_id) +
                          " outside 1..5");
  if (image.ndim() != 2)
    throw dimension_error("gen_sequence: image " + shape_str(image.shape()));
  const int h = image.dim(0), w = image.dim(1);
  SequenceSample out;
  out.label = (seq_id == 4) ? digit : digit * 2 + variant;
  out.meta.seq_id = seq_id;
  out.meta.digit = digit;
  out.meta.variant = variant;
  out.frames = Tensor<float>({window, 1, h, w});
  const int64_t fsz = static_cast<int64_t>(h) * w;

  const double theta5 = seq_id == 5 ? rng.uniform(0.0, 360.0) : 0.0;
  out.meta.angle = theta5;

  for (int k = 1; k <= window; ++k) {
    Tensor<float> frame;
    switch (seq_id) {
      case 1: {
        const int step = variant == 0 ? k : window + 1 - k;
        frame = scale_image(image, static_cast<double>(step) / window);
        break;
      }
      case 2: {
        const double sign = variant == 0 ? 1.0 : -1.0;
        frame = rotate_image(image, sign * 360.0 * k / window);
        break;
      }
      case 3: {
        const int step = variant == 0 ? k : window + 1 - k;
        frame = scale_image(image, 0.5 + 0.5 * (step - 1) / (window - 1));
        break;
      }
      case 4: {
        frame = image;
        const int max_top = h - 14;
        const int ty = static_cast<int>(rng.uniform_int(max_top + 1));
        const int tx = static_cast<int>(rng.uniform_int(max_top + 1));
        for (int y = 0; y < 14; ++y)
          for (int x = 0; x < 14; ++x)
            frame[static_cast<int64_t>(ty + y) * w + tx + x] = 0.0f;
        break;
      }
      case 5: {
        const double sign = variant == 0 ? 1.0 : -1.0;
        frame = rotate_image(image, sign * theta5 * k / window);
        break;
      }
    }
    std::copy(frame.data(), frame.data() + fsz,
              out.frames.data() + static_cast<int64_t>(k - 1) * fsz);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset views. Samples are reproducible from (seed, index) alone, so the
// synthetic sets stay lazy and generation parallelizes per sample.

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual int64_t size() const = 0;
  virtual int num_classes() const = 0;
  virtual int window() const = 0;
  virtual SequenceSample get(int64_t index) const = 0;
};

class SequenceDataset : public Dataset {
 public:
  SequenceDataset(int seq_id, std::shared_ptr<const MnistImages> base,
                  uint64_t seed, int window = 10)
      : seq_id_(seq_id), base_(std::move(base)), seed_(seed), window_(window) {
    if (seq_id < 0 || seq_id > 5)
      throw parameter_error("sequence id " + std::to_string(seq_id));
  }

  int64_t size() const override {
    const bool paired = seq_id_ >= 1 && seq_id_ != 4;
    return paired ? base_->size() * 2 : base_->size();
  }
  int num_classes() const override { return sequence_num_classes(seq_id_); }
  int window() const override { return window_; }
  int seq_id() const { return seq_id_; }

  SequenceSample get(int64_t index) const override {
    const bool paired = seq_id_ >= 1 && seq_id_ != 4;
    const int64_t img = paired ? index / 2 : index;
    const int variant = paired ? static_cast<int>(index % 2) : 0;
    const Tensor<float>& image = base_->images[static_cast<size_t>(img)];
    const int digit = base_->labels[static_cast<size_t>(img)];
    SequenceSample s;
    if (seq_id_ == 0) {
      const int h = image.dim(0), w = image.dim(1);
      s.frames = Tensor<float>({window_, 1, h, w});
      for (int t = 0; t < window_; ++t)
        std::copy(image.data(), image.data() + image.size(),
                  s.frames.data() + static_cast<int64_t>(t) * image.size());
      s.label = digit;
      s.meta.seq_id = 0;
      s.meta.digit = digit;
    } else {
      Rng rng(seed_, static_cast<uint64_t>(index));
      s = gen_sequence(seq_id_, image, digit, variant, rng, window_);
    }
    s.meta.sample_index = static_cast<uint64_t>(index);
    return s;
  }

 private:
  int seq_id_;
  std::shared_ptr<const MnistImages> base_;
  uint64_t seed_;
  int window_;
};

class MaterializedDataset : public Dataset {
 public:
  MaterializedDataset(std::vector<SequenceSample> samples, int num_classes,
                      int window)
      : samples_(std::move(samples)), num_classes_(num_classes),
        window_(window) {}

  int64_t size() const override { return static_cast<int64_t>(samples_.size()); }
  int num_classes() const override { return num_classes_; }
  int window() const override { return window_; }
  SequenceSample get(int64_t i) const override {
    return samples_[static_cast<size_t>(i)];
  }
  const SequenceSample& ref(int64_t i) const {
    return samples_[static_cast<size_t>(i)];
  }

 private:
  std::vector<SequenceSample> samples_;
  int num_classes_;
  int window_;
};

inline std::shared_ptr<Dataset> gen_dataset(int seq_id,
                                            std::shared_ptr<const MnistImages> base,
                                            uint64_t seed, int window = 10) {
  return std::make_shared<SequenceDataset>(seq_id, std::move(base), seed, window);
}

inline MaterializedDataset materialize(const Dataset& ds, int64_t count = 0,
                                       int threads = 1) {
  const int64_t n = count > 0 ? std::min(count, ds.size()) : ds.size();
  std::vector<SequenceSample> out(static_cast<size_t>(n));
  parallel_for(n, threads, [&](int64_t i) { out[static_cast<size_t>(i)] = ds.get(i); });
  return MaterializedDataset(std::move(out), ds.num_classes(), ds.window());
}

// ---------------------------------------------------------------------------
// On-disk cache: "SSEQ1" magic, then u32 seq id, count, window, H, W
// (little-endian), then per sample one label byte and the frames as float32
// little-endian. Channel count is implied by the sequence id.

namespace detail {

inline void sample_bytes(const SequenceSample& s, std::vector<unsigned char>& buf) {
  buf.clear();
  buf.push_back(static_cast<unsigned char>(s.label));
  buf.reserve(1 + static_cast<size_t>(s.frames.size()) * 4);
  for (int64_t i = 0; i < s.frames.size(); ++i) append_f32_le(buf, s.frames[i]);
}

inline void cache_header_bytes(int seq_id, int64_t count, int window, int h,
                               int w, std::vector<unsigned char>& buf) {
  buf.assign({'S', 'S', 'E', 'Q', '1'});
  auto put_u32 = [&buf](uint32_t v) {
    buf.push_back(static_cast<unsigned char>(v));
    buf.push_back(static_cast<unsigned char>(v >> 8));
    buf.push_back(static_cast<unsigned char>(v >> 16));
    buf.push_back(static_cast<unsigned char>(v >> 24));
  };
  put_u32(static_cast<uint32_t>(seq_id));
  put_u32(static_cast<uint32_t>(count));
  put_u32(static_cast<uint32_t>(window));
  put_u32(static_cast<uint32_t>(h));
  put_u32(static_cast<uint32_t>(w));
}

}  // namespace detail

inline void save_dataset_cache(const std::string& path, const Dataset& ds,
                               int seq_id) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw path_error("cannot write " + path);
  const SequenceSample first = ds.get(0);
  const int h = first.frames.dim(2), w = first.frames.dim(3);
  std::vector<unsigned char> buf;
  detail::cache_header_bytes(seq_id, ds.size(), ds.window(), h, w, buf);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
  for (int64_t i = 0; i < ds.size(); ++i) {
    detail::sample_bytes(ds.get(i), buf);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw path_error("short write on " + path);
}

// Checksum of the exact cache byte stream, without touching the disk.
inline uint64_t dataset_cache_checksum(const Dataset& ds, int seq_id,
                                       int threads = 1) {
  const SequenceSample first = ds.get(0);
  const int h = first.frames.dim(2), w = first.frames.dim(3);
  std::vector<unsigned char> head;
  detail::cache_header_bytes(seq_id, ds.size(), ds.window(), h, w, head);
  Fnv1a64 sum;
  sum.update(head.data(), head.size());
  // Per-sample digests first (parallel), folded in index order.
  const int64_t n = ds.size();
  std::vector<uint64_t> digests(static_cast<size_t>(n));
  parallel_for(n, threads, [&](int64_t i) {
    std::vector<unsigned char> buf;
    detail::sample_bytes(ds.get(i), buf);
    Fnv1a64 s;
    s.update(buf.data(), buf.size());
    digests[static_cast<size_t>(i)] = s.digest();
  });
  for (uint64_t d : digests) sum.update(&d, sizeof(d));
  return sum.digest();
}

inline MaterializedDataset load_dataset_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw path_error("cannot open " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::string(magic, 5) != "SSEQ1")
    throw format_error(path + ": bad cache magic");
  const uint32_t seq = read_u32_le(is);
  const uint32_t count = read_u32_le(is);
  const uint32_t window = read_u32_le(is);
  const uint32_t h = read_u32_le(is);
  const uint32_t w = read_u32_le(is);
  if (!is || window == 0 || h == 0 || w == 0)
    throw format_error(path + ": bad cache header");
  const int channels = seq == 6 ? 2 : 1;
  std::vector<SequenceSample> samples;
  samples.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    SequenceSample s;
    const int lb = is.get();
    if (lb < 0) throw format_error(path + ": truncated at sample " + std::to_string(i));
    s.label = lb;
    s.frames = Tensor<float>({static_cast<int>(window), channels,
                              static_cast<int>(h), static_cast<int>(w)});
    for (int64_t j = 0; j < s.frames.size(); ++j) s.frames[j] = read_f32_le(is);
    if (!is) throw format_error(path + ": truncated at sample " + std::to_string(i));
    s.meta.seq_id = static_cast<int>(seq);
    s.meta.sample_index = i;
    samples.push_back(std::move(s));
  }
  return MaterializedDataset(std::move(samples),
                             sequence_num_classes(static_cast<int>(seq)),
                             static_cast<int>(window));
}

// ---------------------------------------------------------------------------
// Neuromorphic event streams (AER) and the published 5-byte record format:
// byte0 = x, byte1 = y, byte2 bit7 = polarity, low 23 bits = timestamp (us).

struct Event {
  int x = 0, y = 0, polarity = 0;
  uint32_t t_us = 0;
};

struct EventStream {
  std::vector<Event> events;
  int width = 34, height = 34;
};

inline EventStream load_nmnist(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw path_error("cannot open " + path);
  const std::streamoff len = is.tellg();
  if (len % 5 != 0)
    throw format_error(path + ": length " + std::to_string(len) +
                       " not divisible by 5");
  is.seekg(0);
  EventStream out;
  out.events.reserve(static_cast<size_t>(len / 5));
  uint32_t last_t = 0;
  std::vector<unsigned char> buf(static_cast<size_t>(len));
  is.read(reinterpret_cast<char*>(buf.data()), len);
  if (!is) throw format_error(path + ": short read");
  for (size_t i = 0; i < buf.size(); i += 5) {
    Event e;
    e.x = buf[i];
    e.y = buf[i + 1];
    e.polarity = (buf[i + 2] >> 7) & 1;
    e.t_us = (static_cast<uint32_t>(buf[i + 2] & 0x7F) << 16) |
             (static_cast<uint32_t>(buf[i + 3]) << 8) | buf[i + 4];
    if (e.x >= out.width || e.y >= out.height)
      throw format_error(path + ": event coordinate (" + std::to_string(e.x) +
                         "," + std::to_string(e.y) + ") outside " +
                         std::to_string(out.width) + "x" +
                         std::to_string(out.height));
    if (e.t_us < last_t)
      throw format_error(path + ": timestamps decrease at event " +
                         std::to_string(i / 5));
    last_t = e.t_us;
    out.events.push_back(e);
  }
  return out;
}

inline void write_nmnist_bin(const std::string& path, const EventStream& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw path_error("cannot write " + path);
  for (const Event& e : s.events) {
    unsigned char rec[5] = {
        static_cast<unsigned char>(e.x), static_cast<unsigned char>(e.y),
        static_cast<unsigned char>(((e.polarity & 1) << 7) |
                                   ((e.t_us >> 16) & 0x7F)),
        static_cast<unsigned char>((e.t_us >> 8) & 0xFF),
        static_cast<unsigned char>(e.t_us & 0xFF)};
    os.write(reinterpret_cast<const char*>(rec), 5);
  }
}

struct StackedEvents {
  Tensor<float> frames;  // [window x 2 x H x W], binary
  bool empty = false;    // warning flag for an empty stream
};

// Consecutive chunks of `events_per_frame` events become one binary frame
// (OR per polarity plane); frames beyond the available events stay zero.
inline StackedEvents stack_events(const EventStream& stream,
                                  int events_per_frame, int window) {
  if (events_per_frame < 1)
    throw parameter_error("stack_events: events_per_frame must be >= 1");
  if (window < 1) throw parameter_error("stack_events: window must be >= 1");
  StackedEvents out;
  out.frames = Tensor<float>({window, 2, stream.height, stream.width});
  out.empty = stream.events.empty();
  const int64_t plane = static_cast<int64_t>(stream.height) * stream.width;
  for (size_t i = 0; i < stream.events.size(); ++i) {
    const int64_t f = static_cast<int64_t>(i) / events_per_frame;
    if (f >= window) break;
    const Event& e = stream.events[i];
    out.frames[(f * 2 + e.polarity) * plane +
               static_cast<int64_t>(e.y) * stream.width + e.x] = 1.0f;
  }
  return out;
}

// Scans <dir>/<digit>/*.bin (the usual per-class layout), file order sorted.
inline std::vector<std::pair<std::string, int>> list_event_files(
    const std::string& dir, int64_t limit_per_class = 0) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, int>> out;
  for (int digit = 0; digit <= 9; ++digit) {
    const fs::path cls = fs::path(dir) / std::to_string(digit);
    if (!fs::exists(cls)) continue;
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(cls))
      if (entry.path().extension() == ".bin") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (limit_per_class > 0 && static_cast<int64_t>(files.size()) > limit_per_class)
      files.resize(static_cast<size_t>(limit_per_class));
    for (auto& f : files) out.emplace_back(std::move(f), digit);
  }
  return out;
}

// Stacks an event-file tree into a materialized dataset. Frames are padded
// from the native resolution to `pad_to` (36 for the two-pool network).
inline MaterializedDataset load_event_dataset(const std::string& dir,
                                              int events_per_frame, int window,
                                              int64_t limit_per_class = 0,
                                              int pad_to = 36) {
  const auto files = list_event_files(dir, limit_per_class);
  if (files.empty()) throw path_error("no .bin event files under " + dir);
  std::vector<SequenceSample> samples(files.size());
  for (size_t i = 0; i < files.size(); ++i) {
    const EventStream es = load_nmnist(files[i].first);
    StackedEvents st = stack_events(es, events_per_frame, window);
    const int h = es.height, w = es.width;
    const int off = (pad_to - h) / 2;
    SequenceSample s;
    if (pad_to > h || pad_to > w) {
      s.frames = Tensor<float>({window, 2, pad_to, pad_to});
      for (int t = 0; t < window; ++t)
        for (int p = 0; p < 2; ++p)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              s.frames[((static_cast<int64_t>(t) * 2 + p) * pad_to + y + off) *
                           pad_to + x + off] =
                  st.frames[((static_cast<int64_t>(t) * 2 + p) * h + y) * w + x];
    } else {
      s.frames = std::move(st.frames);
    }
    s.label = files[i].second;
    s.meta.seq_id = 6;
    s.meta.digit = files[i].second;
    s.meta.sample_index = i;
    samples[i] = std::move(s);
  }
  return MaterializedDataset(std::move(samples), 10, window);
}

// ---------------------------------------------------------------------------
// Stand-in digit corpus. A procedural 10-class glyph renderer with affine
// jitter, written and read through the real IDX files. Used by tooling and
// tests when the actual MNIST files are not on disk; it is not MNIST and is
// always labelled as a stand-in where it appears.

namespace synth {

struct Stroke {
  std::vector<std::pair<double, double>> pts;  // unit square, y down
};

inline void arc(std::vector<Stroke>& strokes, double cx, double cy, double rx,
                double ry, double a0_deg, double a1_deg, int n = 14) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = (a0_deg + (a1_deg - a0_deg) * i / n) * 3.14159265358979323846 / 180.0;
    s.pts.emplace_back(cx + rx * std::cos(a), cy + ry * std::sin(a));
  }
  strokes.push_back(std::move(s));
}

inline void line(std::vector<Stroke>& strokes,
                 std::initializer_list<std::pair<double, double>> pts) {
  strokes.push_back(Stroke{std::vector<std::pair<double, double>>(pts)});
}

inline const std::vector<std::vector<Stroke>>& glyphs() {
  static const std::vector<std::vector<Stroke>> g = [] {
    std::vector<std::vector<Stroke>> all(10);
    arc(all[0], 0.50, 0.50, 0.24, 0.34, 0, 360, 22);
    line(all[1], {{0.38, 0.28}, {0.54, 0.14}, {0.54, 0.86}});
    arc(all[2], 0.50, 0.32, 0.21, 0.17, 180, 360, 10);
    line(all[2], {{0.71, 0.32}, {0.70, 0.44}, {0.30, 0.84}, {0.73, 0.84}});
    arc(all[3], 0.46, 0.32, 0.21, 0.16, 210, 90, 10);
    arc(all[3], 0.46, 0.66, 0.24, 0.19, 270, 150, 12);
    line(all[4], {{0.62, 0.86}, {0.62, 0.14}, {0.26, 0.60}, {0.80, 0.60}});
    line(all[5], {{0.70, 0.16}, {0.34, 0.16}, {0.32, 0.46}});
    arc(all[5], 0.47, 0.63, 0.23, 0.21, 250, 480, 14);
    arc(all[6], 0.47, 0.63, 0.20, 0.21, 0, 360, 16);
    line(all[6], {{0.60, 0.16}, {0.42, 0.40}, {0.30, 0.60}});
    line(all[7], {{0.28, 0.16}, {0.72, 0.16}, {0.44, 0.85}});
    arc(all[8], 0.50, 0.32, 0.17, 0.15, 0, 360, 14);
    arc(all[8], 0.50, 0.67, 0.21, 0.18, 0, 360, 14);
    arc(all[9], 0.53, 0.37, 0.19, 0.17, 0, 360, 14);
    line(all[9], {{0.72, 0.40}, {0.67, 0.85}});
    return all;
  }();
  return g;
}

inline double dist_to_segment(double px, double py, double ax, double ay,
                              double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Renders one jittered glyph into a 28x28 image with antialiased strokes.
inline Tensor<float> render_digit(int digit, Rng& rng) {
  const auto& strokes = glyphs()[static_cast<size_t>(digit)];
  const double rot = rng.uniform(-0.22, 0.22);        // radians, ~12.6 deg
  const double sx = rng.uniform(0.80, 1.08);
  const double sy = rng.uniform(0.80, 1.08);
  const double tx = rng.uniform(-1.6, 1.6);
  const double ty = rng.uniform(-1.6, 1.6);
  const double half_w = rng.uniform(0.75, 1.25);      // stroke half-width, px
  const double gain = rng.uniform(0.80, 1.0);
  const double c = std::cos(rot), s = std::sin(rot);

  // Unit coords -> pixel coords (22 px glyph box centered in 28).
  std::vector<std::pair<double, double>> pix;
  auto map_pt = [&](double ux, double uy) {
    const double gx = (ux - 0.5) * 22.0 * sx;
    const double gy = (uy - 0.5) * 22.0 * sy;
    return std::pair<double, double>(13.5 + c * gx - s * gy + tx,
                                     13.5 + s * gx + c * gy + ty);
  };

  Tensor<float> img({28, 28});
  const double aa = 0.9;
  for (const Stroke& st : strokes) {
    pix.clear();
    for (const auto& p : st.pts) pix.push_back(map_pt(p.first, p.second));
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x) {
        double d = 1e9;
        for (size_t i = 0; i + 1 < pix.size(); ++i)
          d = std::min(d, dist_to_segment(x, y, pix[i].first, pix[i].second,
                                          pix[i + 1].first, pix[i + 1].second));
        const double v = std::clamp((half_w + aa - d) / aa, 0.0, 1.0) * gain;
        float& px = img[static_cast<int64_t>(y) * 28 + x];
        px = std::max(px, static_cast<float>(v));
      }
  }
  return img;
}

}  // namespace synth

// Balanced (label = i mod 10), reproducible from (seed, index).
inline MnistImages synth_digit_corpus(int64_t count, uint64_t seed,
                                      int threads = 1) {
  MnistImages out;
  out.images.resize(static_cast<size_t>(count));
  out.labels.resize(static_cast<size_t>(count));
  parallel_for(count, threads, [&](int64_t i) {
    Rng rng(seed, static_cast<uint64_t>(i));
    const int digit = static_cast<int>(i % 10);
    out.images[static_cast<size_t>(i)] = synth::render_digit(digit, rng);
    out.labels[static_cast<size_t>(i)] = static_cast<uint8_t>(digit);
  });
  return out;
}

// Rate-codes an intensity image into an AER stream on a 34x34 sensor
// (event count per pixel proportional to intensity, timestamps increasing).
inline EventStream encode_image_events(const Tensor<float>& img, int n_events,
                                       Rng& rng) {
  const int h = img.dim(0), w = img.dim(1);
  EventStream out;
  const int off_y = (out.height - h) / 2, off_x = (out.width - w) / 2;
  std::vector<double> cdf(static_cast<size_t>(img.size()));
  double acc = 0;
  for (int64_t i = 0; i < img.size(); ++i) {
    acc += static_cast<double>(img[i]);
    cdf[static_cast<size_t>(i)] = acc;
  }
  if (acc <= 0) return out;
  out.events.reserve(static_cast<size_t>(n_events));
  for (int i = 0; i < n_events; ++i) {
    const double r = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    const int64_t idx = std::min<int64_t>(
        static_cast<int64_t>(it - cdf.begin()), img.size() - 1);
    Event e;
    e.x = static_cast<int>(idx % w) + off_x;
    e.y = static_cast<int>(idx / w) + off_y;
    e.polarity = static_cast<int>(rng.next_u64() & 1);
    e.t_us = static_cast<uint32_t>(i);
    out.events.push_back(e);
  }
  return out;
}

// Writes a per-class .bin tree of encoded events (the stand-in counterpart
// of an event-camera dataset) and returns the root directory.
inline void write_event_tree(const std::string& dir, const MnistImages& base,
                             int64_t count, int events_per_sample,
                             uint64_t seed) {
  namespace fs = std::filesystem;
  for (int d = 0; d <= 9; ++d)
    fs::create_directories(fs::path(dir) / std::to_string(d));
  const int64_t n = std::min<int64_t>(count, base.size());
  for (int64_t i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<uint64_t>(i) + 0x9000000000000000ull);
    const EventStream es =
        encode_image_events(base.images[static_cast<size_t>(i)],
                            events_per_sample, rng);
    char name[32];
    std::snprintf(name, sizeof(name), "%06lld.bin",
                  static_cast<long long>(i));
    write_nmnist_bin((fs::path(dir) / std::to_string(base.labels[static_cast<size_t>(i)]) /
                      name).string(),
                     es);
  }
}

}  // namespace stsnet

#endif  // STSNET_DATA_HPP_
