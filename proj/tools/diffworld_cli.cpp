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

// diffworld: file-in/file-out front end for the synthesizer, codec,
// source-excitation transform, feature fitting and losses.
//
// Exit codes: 0 success, 1 internal error, 2 usage/I-O/format error,
// 3 validation error.

#include <CLI11.hpp>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include "diffworld/excite.hpp"
#include "diffworld/features.hpp"
#include "diffworld/fit.hpp"
#include "diffworld/losses.hpp"
#include "diffworld/melcodec.hpp"
#include "diffworld/stft.hpp"
#include "diffworld/synth.hpp"
#include "diffworld/wav.hpp"

namespace fs = std::filesystem;
using namespace diffworld;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kFormat = 2, kValidation = 3 };

std::string format_fixed(double v, int precision) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return std::string(buf, r.ptr);
}

std::string format_shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

// FIR taps: raw little-endian float64, tap 0 first.
std::vector<Real> read_taps(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % 8 != 0) {
    throw FormatError(path.string() + ": FIR file must hold a whole number of float64 taps");
  }
  std::vector<Real> taps(bytes.size() / 8);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
      bits = (bits << 8) | static_cast<std::uint8_t>(bytes[i * 8 + static_cast<std::size_t>(b)]);
    }
    taps[i] = static_cast<Real>(std::bit_cast<double>(bits));
  }
  return taps;
}

void write_taps(const fs::path& path, const std::vector<Real>& taps) {
  std::string bytes;
  for (Real t : taps) {
    const auto bits = std::bit_cast<std::uint64_t>(static_cast<double>(t));
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  write_text(path, bytes);
}

// Power envelope of a feature file, decompressing compressed input.
WorldFeatures raw_features(const AnyFeatures& any) {
  if (const auto* raw = std::get_if<WorldFeatures>(&any)) return *raw;
  return decompress_features(std::get<CompressedFeatures>(any));
}

struct SynthArgs {
  std::string input, output, fir;
  double gain_harmonic = 1, gain_noise = 1, gain_dry = 1, gain_postnet = 1;
  double gain_direct = 1, gain_fir = 1;
  std::uint64_t seed = 0;
  bool pcm16 = false;
};

int run_synth(const SynthArgs& a) {
  const AnyFeatures features = read_features(a.input);
  SynthConfig cfg = SynthConfig::for_features(meta_of(features));
  cfg.gain_harmonic = a.gain_harmonic;
  cfg.gain_noise = a.gain_noise;
  cfg.gain_dry = a.gain_dry;
  cfg.gain_postnet = a.gain_postnet;
  cfg.gain_direct = a.gain_direct;
  cfg.gain_fir = a.gain_fir;
  cfg.noise_seed = a.seed;
  std::optional<FirPostFilter> fir;
  PostChain post;
  if (!a.fir.empty()) {
    fir = FirPostFilter::from_response(read_taps(a.fir));
    post.fir = &*fir;
  }
  const Waveform y = synthesize(features, cfg, post);
  write_wav(a.output, y, a.pcm16 ? WavEncoding::kPcm16 : WavEncoding::kFloat32);
  return kOk;
}

int run_compress(const std::string& in, const std::string& out, std::size_t mels,
                 std::size_t ap_bands) {
  const AnyFeatures features = read_features(in);
  const auto* raw = std::get_if<WorldFeatures>(&features);
  if (raw == nullptr) throw FormatError(in + ": features are already compressed");
  write_features(out, compress_features(*raw, mels, ap_bands));
  return kOk;
}

int run_decompress(const std::string& in, const std::string& out) {
  const AnyFeatures features = read_features(in);
  const auto* comp = std::get_if<CompressedFeatures>(&features);
  if (comp == nullptr) throw FormatError(in + ": features are already decompressed");
  write_features(out, decompress_features(*comp));
  return kOk;
}

struct ExciteArgs {
  std::string input, src_env, tgt_env, output;
  bool use_decompressed = false;
  std::size_t mels = kDefaultMelBands;
};

int run_excite(const ExciteArgs& a) {
  const WorldFeatures src = raw_features(read_features(a.src_env));
  const WorldFeatures tgt = raw_features(read_features(a.tgt_env));
  if (!(src.meta == tgt.meta)) {
    throw ValidationError("source and target envelopes use different framing");
  }
  const Waveform x = read_wav(a.input, src.meta.sample_rate);
  const StftConfig cfg{src.meta.fft_size, src.meta.hop};
  const std::size_t frames = src.frames(), bins = src.bins();
  if (tgt.frames() != frames) {
    throw ValidationError("source envelope has " + std::to_string(frames) +
                          " frames, target has " + std::to_string(tgt.frames()));
  }
  std::optional<MelBasis> codec;
  if (a.use_decompressed) codec.emplace(src.meta.sample_rate, src.meta.fft_size, a.mels);
  const Tensor y = transform_formants(Tensor::vector(x.samples),
                                      Tensor::constant({frames, bins}, src.sp),
                                      Tensor::constant({frames, bins}, tgt.sp), cfg,
                                      codec ? &*codec : nullptr);
  write_wav(a.output, {y.to_vector(), x.sample_rate});
  return kOk;
}

struct FitArgs {
  std::string target, f0, output, trace, fir_out, init;
  std::size_t steps = 1000, mels = kDefaultMelBands, ap_bands = kDefaultApBands;
  std::size_t scales = 6, fir_length = 1024;
  double lr = FitConfig{}.adam.learning_rate;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int run_fit(const FitArgs& a) {
  const AnyFeatures f0_source = read_features(a.f0);
  const FeatureMeta meta = meta_of(f0_source);
  const Waveform target = read_wav(a.target, meta.sample_rate);
  FitConfig cfg;
  cfg.steps = a.steps;
  cfg.adam.learning_rate = static_cast<Real>(a.lr);
  cfg.seed = a.seed;
  cfg.mel_bands = a.mels;
  cfg.ap_bands = a.ap_bands;
  cfg.msl.scales = a.scales;
  cfg.fit_fir = !a.fir_out.empty();
  cfg.fir_length = a.fir_length;

  std::optional<CompressedFeatures> init;
  if (!a.init.empty()) {
    AnyFeatures any = read_features(a.init);
    if (auto* raw = std::get_if<WorldFeatures>(&any)) {
      init = compress_features(*raw, a.mels, a.ap_bands);
    } else {
      init = std::get<CompressedFeatures>(any);
    }
  }
  FitProgress progress;
  if (!a.quiet) {
    const std::size_t every = std::max<std::size_t>(1, a.steps / 10);
    progress = [every, steps = a.steps](std::size_t step, Real loss) {
      if (step % every == 0 || step + 1 == steps) {
        std::cerr << "step " << step << " msl " << format_fixed(loss, 6) << '\n';
      }
    };
  }
  const FitResult result =
      fit(target, f0_of(f0_source), meta, cfg, init ? &*init : nullptr, nullptr, progress);
  write_features(a.output, result.features);
  if (!a.trace.empty()) {
    std::string csv = "step,msl\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
      csv += std::to_string(i) + ',' + format_shortest(result.trace[i]) + '\n';
    }
    write_text(a.trace, csv);
  }
  if (cfg.fit_fir) write_taps(a.fir_out, result.fir_response);
  return kOk;
}

int run_loss(const std::string& a_path, const std::string& b_path, std::size_t scales,
             double kappa) {
  const Waveform a = read_wav(a_path);
  const Waveform b = read_wav(b_path, a.sample_rate);
  if (a.samples.size() != b.samples.size()) {
    throw ValidationError("signals differ in length: " + std::to_string(a.samples.size()) +
                          " vs " + std::to_string(b.samples.size()));
  }
  MslConfig cfg;
  cfg.scales = scales;
  cfg.kappa = static_cast<Real>(kappa);
  const Real value = msl(Tensor::vector(a.samples), Tensor::vector(b.samples), cfg).item();
  std::cout << format_fixed(value, 6) << '\n';
  return kOk;
}

int run_spectrogram(const std::string& in, const std::string& out, std::size_t mels,
                    std::size_t fft, std::size_t hop) {
  const Waveform x = read_wav(in);
  const StftConfig cfg{fft, hop};
  cfg.validate();
  const MelBasis basis(x.sample_rate, fft, mels);
  const Tensor power = square(complex_abs(stft(Tensor::vector(x.samples), cfg)));
  const Tensor logmel = compress_sp(power, basis);
  std::string csv;
  const std::size_t frames = logmel.dim(0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t m = 0; m < mels; ++m) {
      if (m) csv += ',';
      csv += format_shortest(logmel[t * mels + m]);
    }
    csv += '\n';
  }
  write_text(out, csv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable WORLD synthesizer tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "diffworld 1.0.0");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Synthesize a WAV from WFEAT features");
  cmd_synth->add_option("features", synth.input, "Raw or compressed WFEAT file")->required();
  cmd_synth->add_option("-o,--output", synth.output, "Output WAV")->required();
  cmd_synth->add_option("--gain-harmonic", synth.gain_harmonic, "g_h");
  cmd_synth->add_option("--gain-noise", synth.gain_noise, "g_n");
  cmd_synth->add_option("--gain-dry", synth.gain_dry, "g_0, with --fir");
  cmd_synth->add_option("--gain-postnet", synth.gain_postnet, "g_P, with --fir");
  cmd_synth->add_option("--gain-direct", synth.gain_direct, "g_d, with --fir");
  cmd_synth->add_option("--gain-fir", synth.gain_fir, "g_w, with --fir");
  cmd_synth->add_option("--seed", synth.seed, "Noise seed");
  cmd_synth->add_option("--fir", synth.fir, "FIR response, raw little-endian float64");
  cmd_synth->add_flag("--pcm16", synth.pcm16, "Write 16-bit PCM instead of 32-bit float");

  std::string comp_in, comp_out;
  std::size_t comp_mels = kDefaultMelBands, comp_ap = kDefaultApBands;
  auto* cmd_compress = app.add_subcommand("compress", "Raw features to log Mel form");
  cmd_compress->add_option("features", comp_in, "Raw WFEAT file")->required();
  cmd_compress->add_option("-o,--output", comp_out, "Compressed WFEAT")->required();
  cmd_compress->add_option("--mels", comp_mels, "Mel bands")->check(CLI::PositiveNumber);
  cmd_compress->add_option("--ap-bands", comp_ap, "Aperiodicity bands")
      ->check(CLI::Range(2, 1 << 16));

  std::string dec_in, dec_out;
  auto* cmd_decompress = app.add_subcommand("decompress", "Compressed features to raw form");
  cmd_decompress->add_option("features", dec_in, "Compressed WFEAT file")->required();
  cmd_decompress->add_option("-o,--output", dec_out, "Raw WFEAT")->required();

  ExciteArgs excite;
  auto* cmd_excite =
      app.add_subcommand("excite-transform", "Impose a target envelope on a recording");
  cmd_excite->add_option("input", excite.input, "Input WAV")->required();
  cmd_excite->add_option("--src-env", excite.src_env, "Source envelope WFEAT")->required();
  cmd_excite->add_option("--tgt-env", excite.tgt_env, "Target envelope WFEAT")->required();
  cmd_excite->add_option("-o,--output", excite.output, "Output WAV")->required();
  cmd_excite->add_flag("--use-decompressed", excite.use_decompressed,
                       "Round-trip both envelopes through the Mel codec");
  cmd_excite->add_option("--mels", excite.mels, "Mel bands for --use-decompressed")
      ->check(CLI::PositiveNumber);

  FitArgs fitargs;
  auto* cmd_fit = app.add_subcommand("fit", "Fit compressed features to a target WAV");
  cmd_fit->add_option("target", fitargs.target, "Target WAV")->required();
  cmd_fit->add_option("--f0", fitargs.f0, "WFEAT file supplying f0 and framing")->required();
  cmd_fit->add_option("-o,--output", fitargs.output, "Fitted compressed WFEAT")->required();
  cmd_fit->add_option("--steps", fitargs.steps, "Adam steps")->check(CLI::PositiveNumber);
  cmd_fit->add_option("--lr", fitargs.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  cmd_fit->add_option("--seed", fitargs.seed, "Noise seed");
  cmd_fit->add_option("--trace", fitargs.trace, "Loss trace CSV (step,msl)");
  cmd_fit->add_option("--init", fitargs.init, "Initial features WFEAT");
  cmd_fit->add_option("--mels", fitargs.mels, "Mel bands")->check(CLI::PositiveNumber);
  cmd_fit->add_option("--ap-bands", fitargs.ap_bands, "Aperiodicity bands")
      ->check(CLI::Range(2, 1 << 16));
  cmd_fit->add_option("--scales", fitargs.scales, "MSL scales")->check(CLI::Range(1, 20));
  cmd_fit->add_option("--fir-out", fitargs.fir_out, "Also learn an FIR post-filter");
  cmd_fit->add_option("--fir-length", fitargs.fir_length, "FIR length")
      ->check(CLI::Range(2, 1 << 20));
  cmd_fit->add_flag("-q,--quiet", fitargs.quiet, "No progress output");

  std::string loss_a, loss_b;
  std::size_t loss_scales = 6;
  double loss_kappa = 1;
  auto* cmd_loss = app.add_subcommand("loss", "Multi-spectrogram loss between two WAVs");
  cmd_loss->add_option("a", loss_a, "First WAV")->required();
  cmd_loss->add_option("b", loss_b, "Second WAV")->required();
  cmd_loss->add_option("--scales", loss_scales, "STFT scales")->check(CLI::Range(1, 20));
  cmd_loss->add_option("--kappa", loss_kappa, "Log-magnitude weight");

  std::string spec_in, spec_out;
  std::size_t spec_mels = kDefaultMelBands, spec_fft = 1024, spec_hop = 256;
  auto* cmd_spec = app.add_subcommand("spectrogram", "Log Mel spectrogram as CSV");
  cmd_spec->add_option("input", spec_in, "Input WAV")->required();
  cmd_spec->add_option("-o,--output", spec_out, "CSV, one row per frame")->required();
  cmd_spec->add_option("--mels", spec_mels, "Mel bands")->check(CLI::PositiveNumber);
  cmd_spec->add_option("--fft", spec_fft, "FFT size");
  cmd_spec->add_option("--hop", spec_hop, "Hop size")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kFormat;
  }

  try {
    if (*cmd_synth) return run_synth(synth);
    if (*cmd_compress) return run_compress(comp_in, comp_out, comp_mels, comp_ap);
    if (*cmd_decompress) return run_decompress(dec_in, dec_out);
    if (*cmd_excite) return run_excite(excite);
    if (*cmd_fit) return run_fit(fitargs);
    if (*cmd_loss) return run_loss(loss_a, loss_b, loss_scales, loss_kappa);
    if (*cmd_spec) return run_spectrogram(spec_in, spec_out, spec_mels, spec_fft, spec_hop);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFormat;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFormat;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
