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

#include "diffworld/wav.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "byte_io.hpp"

namespace diffworld {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

Waveform read_wav(const std::filesystem::path& path,
                  std::optional<std::uint32_t> expected_rate) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, path.string());
  if (r.remaining() < 12 || r.tag() != "RIFF") {
    throw FormatError(path.string() + ": not a RIFF file");
  }
  r.u32();
  if (r.tag() != "WAVE") throw FormatError(path.string() + ": not a WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (r.remaining() >= 8) {
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      r.need(size);
      const std::size_t start = r.position();
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      if (format == kFormatExtensible && size >= 40) {
        r.u16();  // cbSize
        r.u16();  // valid bits
        r.u32();  // channel mask
        format = r.u16();  // first two bytes of the subformat GUID
      }
      r.skip(size - (r.position() - start));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      if (channels != 1) {
        throw FormatError(path.string() + ": mono required, file has " +
                          std::to_string(channels) +
                          " channels; downmix externally");
      }
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool float32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !float32) {
        throw FormatError(path.string() + ": unsupported codec (format " +
                          std::to_string(format) + ", " + std::to_string(bits) +
                          " bits); need 16-bit PCM or 32-bit float");
      }
      r.need(size);
      Waveform wave;
      wave.sample_rate = rate;
      const std::size_t count = size / (bits / 8);
      wave.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        if (pcm16) {
          wave.samples[i] = static_cast<Real>(static_cast<std::int16_t>(r.u16())) / Real(32768);
        } else {
          const float v = r.f32();
          if (!std::isfinite(v)) {
            throw ValidationError(path.string() + ": non-finite sample at index " +
                                  std::to_string(i));
          }
          wave.samples[i] = static_cast<Real>(v);
        }
      }
      if (expected_rate && *expected_rate != rate) {
        throw ValidationError(path.string() + ": sample rate " + std::to_string(rate) +
                              " Hz does not match expected " +
                              std::to_string(*expected_rate) + " Hz");
      }
      return wave;
    } else {
      r.skip(std::min<std::size_t>(size + (size & 1), r.remaining()));
    }
  }
  throw FormatError(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding) {
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    if (!std::isfinite(wave.samples[i])) {
      throw ValidationError("cannot write non-finite sample at index " +
                            std::to_string(i));
    }
  }
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(wave.samples.size() * (bits / 8));
  const std::uint32_t fmt_size = pcm16 ? 16 : 18;
  const std::uint32_t fact_size = pcm16 ? 0 : 12;

  detail::ByteWriter w;
  w.tag("RIFF");
  w.u32(4 + (8 + fmt_size) + fact_size + (8 + data_size));
  w.tag("WAVE");
  w.tag("fmt ");
  w.u32(fmt_size);
  w.u16(pcm16 ? kFormatPcm : kFormatFloat);
  w.u16(1);
  w.u32(wave.sample_rate);
  w.u32(wave.sample_rate * (bits / 8));
  w.u16(bits / 8);
  w.u16(bits);
  if (!pcm16) {
    w.u16(0);  // cbSize
    w.tag("fact");
    w.u32(4);
    w.u32(static_cast<std::uint32_t>(wave.samples.size()));
  }
  w.tag("data");
  w.u32(data_size);
  for (Real v : wave.samples) {
    if (pcm16) {
      const double q = std::round(static_cast<double>(v) * 32768.0);
      w.u16(static_cast<std::uint16_t>(
          static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
    } else {
      w.f32(static_cast<float>(v));
    }
  }
  detail::write_file(path, w.bytes());
}

}  // namespace diffworld
