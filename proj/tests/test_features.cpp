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

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "diffworld/features.hpp"
#include "diffworld/stft.hpp"
#include "diffworld/wav.hpp"
#include "test_util.hpp"

using namespace diffworld;
using diffworld::testing::random_vector;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "diffworld_test_features";
  fs::create_directories(dir);
  return dir / name;
}

WorldFeatures small_raw(std::size_t frames = 5) {
  WorldFeatures f;
  f.meta = {16000, 16, 64};
  const std::size_t b = f.bins();
  f.f0 = random_vector(frames, 1, 80, 300);
  f.f0[2] = 0;
  f.sp = random_vector(frames * b, 2, 1e-6, 4);
  f.ap = random_vector(frames * b, 3, 0, 1);
  return f;
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

TEST_CASE("WFEAT raw roundtrip is bit-identical") {
  WorldFeatures f = small_raw();
  f.validate();
  const auto bytes = encode_features(f);
  CHECK(bytes.size() == 36 + 8 * (f.f0.size() + f.sp.size() + f.ap.size()));
  const auto path = scratch("raw.wfeat");
  write_features(path, f);
  const AnyFeatures loaded = read_features(path);
  REQUIRE(std::holds_alternative<WorldFeatures>(loaded));
  const auto& g = std::get<WorldFeatures>(loaded);
  CHECK(g.meta == f.meta);
  CHECK(std::memcmp(g.f0.data(), f.f0.data(), 8 * f.f0.size()) == 0);
  CHECK(std::memcmp(g.sp.data(), f.sp.data(), 8 * f.sp.size()) == 0);
  CHECK(std::memcmp(g.ap.data(), f.ap.data(), 8 * f.ap.size()) == 0);
  CHECK(encode_features(g) == bytes);
}

TEST_CASE("WFEAT compressed roundtrip") {
  CompressedFeatures c;
  c.meta = {22050, 256, 1024};
  c.mel_bands = 4;
  c.ap_bands = 3;
  c.f0 = {100, 0, 120};
  c.s = random_vector(12, 4, -5, 1);
  c.a = random_vector(9, 5, 0, 1);
  c.validate();
  const AnyFeatures back = decode_features(encode_features(c));
  REQUIRE(std::holds_alternative<CompressedFeatures>(back));
  const auto& d = std::get<CompressedFeatures>(back);
  CHECK(d.mel_bands == 4);
  CHECK(d.ap_bands == 3);
  CHECK(d.s == c.s);
  CHECK(d.a == c.a);
  CHECK(f0_of(back) == c.f0);
  CHECK(meta_of(back) == c.meta);
}

TEST_CASE("unvoiced frames get unit aperiodicity on load") {
  WorldFeatures f = small_raw();
  const auto back = std::get<WorldFeatures>(decode_features(encode_features(f)));
  const std::size_t b = f.bins();
  for (std::size_t k = 0; k < b; ++k) CHECK(back.ap[2 * b + k] == 1);
  for (std::size_t k = 0; k < b; ++k) CHECK(back.ap[b + k] == f.ap[b + k]);
}

TEST_CASE("invariant violations name frame and bin") {
  WorldFeatures f = small_raw();
  f.ap[3 * f.bins() + 7] = 1.5;
  try {
    decode_features(encode_features(f));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bin 7") != std::string::npos);
    CHECK(msg.find("frame 3") != std::string::npos);
  }
  WorldFeatures g = small_raw();
  g.sp[4] = -1;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  WorldFeatures h = small_raw();
  h.f0[0] = std::nan("");
  CHECK_THROWS_AS(h.validate(), ValidationError);
  WorldFeatures k = small_raw();
  k.sp.pop_back();
  CHECK_THROWS_AS(k.validate(), ValidationError);
}

TEST_CASE("malformed WFEAT files") {
  auto bytes = encode_features(small_raw());
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_features(bytes), FormatError);
  }
  SUBCASE("bad version") {
    bytes[4] = 2;
    CHECK_THROWS_AS(decode_features(bytes), FormatError);
  }
  SUBCASE("truncated payload") {
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(decode_features(bytes), FormatError);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_features(bytes), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_features(scratch("does_not_exist.wfeat")), FormatError);
  }
}

TEST_CASE("framing convention") {
  // 3 s at 22050 Hz, hop 256: floor(66150 / 256) + 1
  CHECK(frame_count(66150, 256) == 259);
  CHECK(frame_count(0, 256) == 1);
  CHECK(frame_count(256, 256) == 2);
  CHECK_NOTHROW(check_frame_alignment(66150, 259, 256));
  CHECK_NOTHROW(check_frame_alignment(259 * 256, 259, 256));
  CHECK_THROWS_AS(check_frame_alignment(66150, 200, 256), ValidationError);
  CHECK_THROWS_AS(check_frame_alignment(259 * 256 + 1, 259, 256), ValidationError);
}

TEST_CASE("WAV roundtrips") {
  Waveform w;
  w.sample_rate = 22050;
  w.samples = random_vector(1000, 9, -1, 0.999);
  w.samples[0] = -1;
  w.samples[1] = 0;

  SUBCASE("16-bit within one quantization step") {
    const auto path = scratch("pcm16.wav");
    write_wav(path, w, WavEncoding::kPcm16);
    const Waveform r = read_wav(path);
    CHECK(r.sample_rate == 22050);
    REQUIRE(r.samples.size() == w.samples.size());
    CHECK(diffworld::testing::max_abs_diff(r.samples, w.samples) <= 1.0 / 32768);
  }
  SUBCASE("32-bit float exact") {
    const auto path = scratch("float.wav");
    std::vector<Real> exact;
    for (Real v : w.samples) exact.push_back(static_cast<float>(v));
    write_wav(path, {exact, 22050});
    const Waveform r = read_wav(path, 22050);
    CHECK(r.samples == exact);
  }
  SUBCASE("rate mismatch") {
    const auto path = scratch("rate.wav");
    write_wav(path, w);
    CHECK_THROWS_AS(read_wav(path, 16000), ValidationError);
  }
  SUBCASE("non-finite samples are refused") {
    Waveform bad = w;
    bad.samples[5] = INFINITY;
    CHECK_THROWS_AS(write_wav(scratch("bad.wav"), bad), ValidationError);
  }
}

TEST_CASE("stereo WAV is rejected") {
  std::string body;
  body += "WAVE";
  body += "fmt ";
  put_u32(body, 16);
  put_u16(body, 1);      // PCM
  put_u16(body, 2);      // channels
  put_u32(body, 22050);
  put_u32(body, 22050 * 4);
  put_u16(body, 4);
  put_u16(body, 16);
  body += "data";
  put_u32(body, 8);
  body.append(8, '\0');
  std::string file = "RIFF";
  put_u32(file, static_cast<std::uint32_t>(body.size()));
  file += body;
  const auto path = scratch("stereo.wav");
  std::ofstream(path, std::ios::binary) << file;
  try {
    read_wav(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("mono required") != std::string::npos);
  }
}
