#pragma once

// Command implementations behind the spe CLI. Each returns structured
// results so callers decide how to report them.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spe/encoder.hpp"
#include "spe/fisheye.hpp"
#include "spe/image_io.hpp"

namespace spe {

inline nlohmann::json params_to_json(const FisheyeParams& p) {
  return {{"k", p.k}, {"n_exp", p.n_exp}, {"out_radius", p.out_radius}, {"in_width", p.in_width},
          {"in_height", p.in_height}};
}

struct WarpSummary {
  std::size_t written = 0;
  std::size_t failed = 0;
  nlohmann::json manifest;
};

inline std::string sweep_dir_name(double k) {
  std::ostringstream os;
  os << "k_" << std::fixed << std::setprecision(4) << k;
  return os.str();
}

// Warps every regular file in in_dir (sorted by name). With a sweep, one
// subdirectory per k value. Unreadable files are reported to log and skipped.
// Writes out_dir/manifest.json listing every emitted file with its exact
// parameters.
inline WarpSummary cmd_warp(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                            const FisheyeParams& params, const std::vector<double>& sweep = {},
                            std::size_t workers = 1, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(in_dir)) throw std::runtime_error("warp: not a directory: " + in_dir.string());
  fs::create_directories(out_dir);

  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_regular_file()) inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());

  const std::vector<double> ks = sweep.empty() ? std::vector<double>{params.k} : sweep;
  for (double k : ks) {
    FisheyeParams p = params;
    p.k = k;
    p.require_invertible();
  }

  WarpSummary summary;
  nlohmann::json files = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& input : inputs) {
    Image8 src;
    try {
      src = read_image(input.string());
    } catch (const std::exception& e) {
      if (log) *log << "warp: skipping " << input.string() << ": " << e.what() << '\n';
      failures.push_back({{"source", input.filename().string()}, {"error", e.what()}});
      ++summary.failed;
      continue;
    }
    for (double k : ks) {
      FisheyeParams p = params;
      p.k = k;
      p.in_width = src.width();
      p.in_height = src.height();
      const fs::path rel = sweep.empty() ? fs::path(input.stem().string() + ".png")
                                         : fs::path(sweep_dir_name(k)) / (input.stem().string() + ".png");
      fs::create_directories((out_dir / rel).parent_path());
      write_png((out_dir / rel).string(), warp_image(src, p, {.fill = 0, .workers = workers}));
      auto entry = params_to_json(p);
      entry["source"] = input.filename().string();
      entry["output"] = rel.generic_string();
      files.push_back(std::move(entry));
      ++summary.written;
    }
  }
  summary.manifest = {{"params", params_to_json(params)}, {"sweep", ks}, {"files", files}, {"failures", failures}};
  std::ofstream(out_dir / "manifest.json") << summary.manifest.dump(2) << '\n';
  return summary;
}

enum class ModelKind { vit, pvt };

// Logits JSON for one image. dump() of the result is byte-stable for a fixed
// (image, config, seed).
inline nlohmann::json cmd_forward(const Image8& img, ModelKind model, const EncoderConfig& cfg, std::uint64_t seed,
                                  AttentionRecorder* recorder = nullptr) {
  cfg.validate();
  const auto weights = WeightSet<double>::init(cfg, seed);
  std::vector<double> logits;
  if (model == ModelKind::vit) {
    if (cfg.stages.size() != 1) detail::fail<ConfigError>("forward", "vit needs a single-stage config");
    const auto layout = stage_layout(cfg.stages.front(), 0.5 * std::min(img.width(), img.height()));
    logits = forward_spe_vit(img, layout, cfg, weights, recorder);
  } else {
    logits = forward_spe_pvt(img, cfg, weights, recorder);
  }
  return {{"model", model == ModelKind::vit ? "vit" : "pvt"},
          {"seed", seed},
          {"class_count", cfg.class_count},
          {"config", config_to_json(cfg)},
          {"logits", logits}};
}

}  // namespace spe
