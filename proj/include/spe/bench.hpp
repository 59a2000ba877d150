#pragma once

// Serial versus data-parallel sector patch generation over a batch of
// images. Both paths run the same per-element kernels; the parallel path only
// changes how index ranges are split across threads, so outputs must match
// bit for bit.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "spe/image.hpp"
#include "spe/parallel.hpp"
#include "spe/sampler.hpp"
#include "spe/sector_patch.hpp"

namespace spe {

struct PhaseTimes {
  double grid_ms = 0.0;
  double sampling_ms = 0.0;
  double assembly_ms = 0.0;

  double total() const { return grid_ms + sampling_ms + assembly_ms; }
};

struct PatchBatch {
  std::size_t batch = 0;
  std::size_t tokens_per_image = 0;
  std::size_t token_dim = 0;
  std::vector<double> tokens;  // batch x tokens x dim
  std::uint64_t checksum = 0;
};

inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t hash = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    hash ^= p[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

inline std::vector<Image8> synthetic_batch(int batch, int side, std::uint64_t seed, int channels = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<Image8> images;
  images.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    Image8 img(side, side, channels);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(byte(rng));
    images.push_back(std::move(img));
  }
  return images;
}

// Full patch generation: grid and layout construction, bilinear sampling of
// every image at every grid point, then token assembly. All images must share
// one size.
inline PatchBatch generate_sector_patches(const std::vector<Image8>& images, int rings, int rings_per_band,
                                          int angular_mult, std::size_t workers, PhaseTimes* phases = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  if (images.empty()) detail::fail<DomainError>("generate_sector_patches", "empty batch");
  const int width = images.front().width();
  const int height = images.front().height();
  const int channels = images.front().channels();
  for (const auto& img : images) {
    if (img.width() != width || img.height() != height || img.channels() != channels) {
      detail::fail<DomainError>("generate_sector_patches", "images differ in shape");
    }
  }

  auto t0 = clock::now();
  const SamplingGrid grid = build_grid_for_image(rings, width, height);
  const SectorPatchLayout layout =
      SectorPatchLayout::build(rings, rings_per_band, angular_mult, grid.radius, grid.theta0);
  auto t1 = clock::now();

  const std::size_t n_points = grid.size();
  std::vector<PolarField> fields(images.size(), PolarField(rings, channels));
  parallel_for(images.size() * n_points, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t b = i / n_points;
      const std::size_t p = i % n_points;
      sample_bilinear_at(images[b], grid.points[p].x, grid.points[p].y, fields[b].point(p));
    }
  });
  auto t2 = clock::now();

  PatchBatch out;
  out.batch = images.size();
  out.tokens_per_image = layout.patch_count();
  out.token_dim = static_cast<std::size_t>(layout.points_per_patch()) * channels;
  out.tokens.resize(out.batch * out.tokens_per_image * out.token_dim);
  parallel_for(out.batch * out.tokens_per_image, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t b = i / out.tokens_per_image;
      const std::size_t t = i % out.tokens_per_image;
      double* dst = out.tokens.data() + i * out.token_dim;
      for (int idx : layout.members(t)) {
        for (double v : fields[b].point(static_cast<std::size_t>(idx))) *dst++ = v;
      }
    }
  });
  auto t3 = clock::now();

  out.checksum = fnv1a(out.tokens.data(), out.tokens.size() * sizeof(double));
  if (phases) *phases = {ms(t1 - t0), ms(t2 - t1), ms(t3 - t2)};
  return out;
}

struct BenchConfig {
  std::vector<int> batch_sizes{1, 8, 32};
  int rings = 160;
  int rings_per_band = 16;
  int angular_mult = 4;
  int side = 320;
  int reps = 5;
  std::size_t workers = default_workers();
  std::uint64_t seed = 0;
};

struct BenchRow {
  int batch = 0;
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
  PhaseTimes serial_phases;
  PhaseTimes parallel_phases;
  std::uint64_t serial_checksum = 0;
  std::uint64_t parallel_checksum = 0;
};

struct BenchReport {
  std::size_t workers = 1;
  int reps = 0;
  std::vector<BenchRow> rows;

  void write_csv(std::ostream& os) const {
    os << "batch,workers,serial_ms,parallel_ms,speedup,serial_grid_ms,serial_sampling_ms,serial_assembly_ms,"
          "parallel_grid_ms,parallel_sampling_ms,parallel_assembly_ms,serial_checksum,parallel_checksum\n";
    for (const auto& r : rows) {
      os << r.batch << ',' << workers << ',' << r.serial_ms << ',' << r.parallel_ms << ','
         << r.serial_ms / r.parallel_ms << ',' << r.serial_phases.grid_ms << ',' << r.serial_phases.sampling_ms << ','
         << r.serial_phases.assembly_ms << ',' << r.parallel_phases.grid_ms << ','
         << r.parallel_phases.sampling_ms << ',' << r.parallel_phases.assembly_ms << ",0x" << std::hex
         << r.serial_checksum << ",0x" << r.parallel_checksum << std::dec << '\n';
    }
  }
};

namespace detail {

// Median over reps runs after one warm-up; phases are taken from the run
// whose total time is the median.
inline std::pair<PhaseTimes, std::uint64_t> time_generation(const std::vector<Image8>& images, const BenchConfig& cfg,
                                                            std::size_t workers) {
  std::uint64_t checksum =
      generate_sector_patches(images, cfg.rings, cfg.rings_per_band, cfg.angular_mult, workers).checksum;
  std::vector<PhaseTimes> runs;
  for (int r = 0; r < std::max(1, cfg.reps); ++r) {
    PhaseTimes t;
    const auto batch = generate_sector_patches(images, cfg.rings, cfg.rings_per_band, cfg.angular_mult, workers, &t);
    if (batch.checksum != checksum) throw std::runtime_error("bench: output changed between repetitions");
    runs.push_back(t);
  }
  std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.total() < b.total(); });
  return {runs[runs.size() / 2], checksum};
}

}  // namespace detail

// Throws std::runtime_error when serial and parallel outputs differ.
inline BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.batch_sizes.empty()) detail::fail<ConfigError>("run_bench", "need at least one batch size");
  BenchReport report;
  report.workers = std::max<std::size_t>(1, cfg.workers);
  report.reps = cfg.reps;
  for (int batch : cfg.batch_sizes) {
    if (batch < 1) detail::fail<ConfigError>("run_bench", "batch sizes must be positive");
    const auto images = synthetic_batch(batch, cfg.side, cfg.seed + static_cast<std::uint64_t>(batch));
    BenchRow row;
    row.batch = batch;
    std::tie(row.serial_phases, row.serial_checksum) = detail::time_generation(images, cfg, 1);
    std::tie(row.parallel_phases, row.parallel_checksum) = detail::time_generation(images, cfg, report.workers);
    row.serial_ms = row.serial_phases.total();
    row.parallel_ms = row.parallel_phases.total();
    if (row.serial_checksum != row.parallel_checksum) {
      throw std::runtime_error("bench: serial and parallel patch outputs differ for batch " + std::to_string(batch));
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace spe
