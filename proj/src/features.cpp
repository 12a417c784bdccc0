/*
 * Copyright 2026 The DiffWorld Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "diffworld/features.hpp"

#include <cmath>
#include <string>

#include "byte_io.hpp"
#include "diffworld/fft.hpp"

namespace diffworld {
namespace {

constexpr char kMagic[5] = "WFEA";
constexpr std::uint32_t kKindRaw = 0;
constexpr std::uint32_t kKindCompressed = 1;

void validate_meta(const FeatureMeta& meta) {
  if (meta.sample_rate == 0) throw ValidationError("sample_rate must be positive");
  if (meta.hop == 0) throw ValidationError("hop must be positive");
  if (!is_power_of_two(meta.fft_size)) {
    throw ValidationError("fft_size must be a power of two, got " +
                          std::to_string(meta.fft_size));
  }
}

std::string where(std::size_t frame, std::size_t bin) {
  return " at frame " + std::to_string(frame) + ", bin " + std::to_string(bin);
}

void validate_f0(const std::vector<Real>& f0) {
  for (std::size_t t = 0; t < f0.size(); ++t) {
    if (!std::isfinite(f0[t]) || f0[t] < 0) {
      throw ValidationError("f0 must be finite and >= 0, got " +
                            std::to_string(f0[t]) + " at frame " +
                            std::to_string(t));
    }
  }
}

void validate_matrix(const char* name, const std::vector<Real>& m,
                     std::size_t frames, std::size_t width, Real lo, Real hi) {
  if (m.size() != frames * width) {
    throw ValidationError(std::string(name) + " has " + std::to_string(m.size()) +
                          " values, expected " + std::to_string(frames) + " x " +
                          std::to_string(width));
  }
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < width; ++k) {
      const Real v = m[t * width + k];
      if (!std::isfinite(v) || v < lo || v > hi) {
        throw ValidationError(std::string(name) + " value " + std::to_string(v) +
                              " outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]" + where(t, k));
      }
    }
  }
}

void force_unvoiced(const std::vector<Real>& f0, std::vector<Real>& m,
                    std::size_t width) {
  for (std::size_t t = 0; t < f0.size(); ++t) {
    if (f0[t] != 0) continue;
    std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(t * width), width, Real(1));
  }
}

void put_array(detail::ByteWriter& w, const std::vector<Real>& v) {
  for (Real x : v) w.f64(static_cast<double>(x));
}

std::vector<Real> get_array(detail::ByteReader& r, std::size_t n) {
  r.need(n * 8);
  std::vector<Real> v(n);
  for (auto& x : v) x = static_cast<Real>(r.f64());
  return v;
}

void put_header(detail::ByteWriter& w, const FeatureMeta& meta,
                std::size_t frames, std::uint32_t kind, std::size_t width,
                std::size_t ap_width) {
  w.tag(kMagic);
  w.u32(kWfeatVersion);
  w.u32(meta.sample_rate);
  w.u32(meta.hop);
  w.u32(meta.fft_size);
  w.u32(static_cast<std::uint32_t>(frames));
  w.u32(kind);
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(ap_width));
}

}  // namespace

void WorldFeatures::validate() {
  validate_meta(meta);
  const std::size_t frames = f0.size();
  validate_f0(f0);
  validate_matrix("sp", sp, frames, bins(), 0, INFINITY);
  validate_matrix("ap", ap, frames, bins(), 0, 1);
  force_unvoiced(f0, ap, bins());
}

void CompressedFeatures::validate() {
  validate_meta(meta);
  if (mel_bands == 0 || ap_bands < 2) {
    throw ValidationError("compressed features need mel_bands >= 1 and ap_bands >= 2");
  }
  const std::size_t frames = f0.size();
  validate_f0(f0);
  validate_matrix("s", s, frames, mel_bands, -INFINITY, INFINITY);
  validate_matrix("a", a, frames, ap_bands, 0, 1);
  force_unvoiced(f0, a, ap_bands);
}

std::vector<std::uint8_t> encode_features(const WorldFeatures& features) {
  detail::ByteWriter w;
  put_header(w, features.meta, features.frames(), kKindRaw, features.bins(), 0);
  put_array(w, features.f0);
  put_array(w, features.sp);
  put_array(w, features.ap);
  return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_features(const CompressedFeatures& features) {
  detail::ByteWriter w;
  put_header(w, features.meta, features.frames(), kKindCompressed,
             features.mel_bands, features.ap_bands);
  put_array(w, features.f0);
  put_array(w, features.s);
  put_array(w, features.a);
  return std::move(w.bytes());
}

AnyFeatures decode_features(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "WFEAT");
  if (r.remaining() < 4 || r.tag() != "WFEA") {
    throw FormatError("not a WFEAT file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kWfeatVersion) {
    throw FormatError("unsupported WFEAT version " + std::to_string(version));
  }
  FeatureMeta meta;
  meta.sample_rate = r.u32();
  meta.hop = r.u32();
  meta.fft_size = r.u32();
  const std::size_t frames = r.u32();
  const std::uint32_t kind = r.u32();
  const std::size_t width = r.u32();
  const std::size_t ap_width = r.u32();
  if (!is_power_of_two(meta.fft_size)) {
    throw FormatError("WFEAT fft_size " + std::to_string(meta.fft_size) +
                      " is not a power of two");
  }

  AnyFeatures out;
  if (kind == kKindRaw) {
    if (width != meta.bins() || ap_width != 0) {
      throw FormatError("raw WFEAT width " + std::to_string(width) +
                        " does not match fft_size/2+1 = " +
                        std::to_string(meta.bins()));
    }
    WorldFeatures f;
    f.meta = meta;
    f.f0 = get_array(r, frames);
    f.sp = get_array(r, frames * width);
    f.ap = get_array(r, frames * width);
    out = std::move(f);
  } else if (kind == kKindCompressed) {
    if (width == 0 || ap_width == 0) {
      throw FormatError("compressed WFEAT needs nonzero band counts");
    }
    CompressedFeatures f;
    f.meta = meta;
    f.mel_bands = width;
    f.ap_bands = ap_width;
    f.f0 = get_array(r, frames);
    f.s = get_array(r, frames * width);
    f.a = get_array(r, frames * ap_width);
    out = std::move(f);
  } else {
    throw FormatError("unknown WFEAT kind " + std::to_string(kind));
  }
  if (r.remaining() != 0) {
    throw FormatError("WFEAT has " + std::to_string(r.remaining()) +
                      " trailing bytes");
  }
  std::visit([](auto& f) { f.validate(); }, out);
  return out;
}

AnyFeatures read_features(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_features(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_features(const std::filesystem::path& path,
                    const WorldFeatures& features) {
  detail::write_file(path, encode_features(features));
}

void write_features(const std::filesystem::path& path,
                    const CompressedFeatures& features) {
  detail::write_file(path, encode_features(features));
}

const FeatureMeta& meta_of(const AnyFeatures& features) {
  return std::visit([](const auto& f) -> const FeatureMeta& { return f.meta; },
                    features);
}

const std::vector<Real>& f0_of(const AnyFeatures& features) {
  return std::visit(
      [](const auto& f) -> const std::vector<Real>& { return f.f0; }, features);
}

void check_frame_alignment(std::size_t num_samples, std::size_t frames,
                           std::size_t hop) {
  if (frames == 0) throw ValidationError("feature track has no frames");
  const std::size_t lo = (frames - 1) * hop;
  const std::size_t hi = frames * hop;
  if (num_samples < lo || num_samples > hi) {
    throw ValidationError(
        "waveform of " + std::to_string(num_samples) + " samples does not match " +
        std::to_string(frames) + " frames at hop " + std::to_string(hop) +
        " (expected between " + std::to_string(lo) + " and " +
        std::to_string(hi) + " samples)");
  }
}

}  // namespace diffworld
