// spe: command-line front end for sector patch embedding.
//
//   spe warp     --in DIR --out DIR [--k 0.1 --n-exp 2 --radius 160 --sweep 0.05,0.1]
//   spe density  [--k --n-exp --radius --eval-frac] [--csv F] [--png F]
//   spe viz      --mode grid|patches|density|pe --out F.png [layout flags]
//   spe bench    [--batch 1,8,32 --reps 5 --workers N] [--csv F]
//   spe forward  --image F [--model vit|pvt --preset tiny|base|pvt-tiny --config F --seed S --attn-dir D]
//   spe layout   [--rings 160 --rings-per-band 16 --angular-mult 4] [--out F.json --grid-csv F --pe-csv F]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spe/bench.hpp"
#include "spe/commands.hpp"
#include "spe/spe.hpp"

namespace {

struct LayoutFlags {
  int rings = 160;
  int rings_per_band = 16;
  int angular_mult = 4;
  double radius = 160.0;

  void add(CLI::App* app) {
    app->add_option("--rings", rings, "Ring count N")->capture_default_str();
    app->add_option("--rings-per-band", rings_per_band, "Rings per band g")->capture_default_str();
    app->add_option("--angular-mult", angular_mult, "Sectors in band 1 (q)")->capture_default_str();
    app->add_option("--radius", radius, "Disc radius in pixels")->capture_default_str();
  }

  spe::SectorPatchLayout build() const {
    return spe::SectorPatchLayout::build(rings, rings_per_band, angular_mult, radius);
  }
};

struct FisheyeFlags {
  double k = 0.1;
  double n_exp = 2.0;
  int radius = 160;

  void add(CLI::App* app) {
    app->add_option("--k", k, "Radial scale factor")->capture_default_str();
    app->add_option("--n-exp", n_exp, "Radial exponent")->capture_default_str();
    app->add_option("--radius", radius, "Output disc radius in pixels")->capture_default_str();
  }

  spe::FisheyeParams params(int in_width = 0, int in_height = 0) const {
    spe::FisheyeParams p;
    p.k = k;
    p.n_exp = n_exp;
    p.out_radius = radius;
    p.in_width = in_width > 0 ? in_width : 2 * radius;
    p.in_height = in_height > 0 ? in_height : 2 * radius;
    return p;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sector patch embedding toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t workers = spe::default_workers();
  app.add_option("--workers", workers, "Worker threads for data-parallel kernels")->capture_default_str();

  // warp
  auto* warp = app.add_subcommand("warp", "Warp a directory of images into synthetic fisheye discs");
  std::string warp_in, warp_out;
  std::vector<double> sweep;
  FisheyeFlags warp_fe;
  warp->add_option("--in", warp_in, "Input directory")->required();
  warp->add_option("--out", warp_out, "Output directory")->required();
  warp->add_option("--sweep", sweep, "k values; one output subdirectory each")->delimiter(',');
  warp_fe.add(warp);

  // density
  auto* density = app.add_subcommand("density", "Pixel density map of the fisheye transform");
  FisheyeFlags dens_fe;
  double eval_frac = 0.95;
  int bins = 10;
  std::string dens_csv, dens_png;
  dens_fe.add(density);
  density->add_option("--eval-frac", eval_frac, "Evaluation radius as a fraction of the disc")->capture_default_str();
  density->add_option("--bins", bins, "Radial profile bins")->capture_default_str();
  density->add_option("--csv", dens_csv, "Write x,y,density CSV");
  density->add_option("--png", dens_png, "Write normalized grayscale heatmap");

  // viz
  auto* viz = app.add_subcommand("viz", "Render grids, sector boundaries, density maps or PE matrices");
  std::string viz_mode, viz_out, viz_image;
  LayoutFlags viz_layout;
  FisheyeFlags viz_fe;
  int d_model = 256;
  double power = 1.0;
  viz->add_option("--mode", viz_mode, "grid | patches | density | pe")
      ->required()
      ->check(CLI::IsMember({"grid", "patches", "density", "pe"}));
  viz->add_option("--out", viz_out, "Output PNG")->required();
  viz->add_option("--image", viz_image, "Background image for patches mode");
  viz->add_option("--rings", viz_layout.rings)->capture_default_str();
  viz->add_option("--rings-per-band", viz_layout.rings_per_band)->capture_default_str();
  viz->add_option("--angular-mult", viz_layout.angular_mult)->capture_default_str();
  viz->add_option("--radius", viz_layout.radius, "Disc radius in pixels")->capture_default_str();
  viz->add_option("--fisheye-radius", viz_fe.radius, "Output radius for density mode")->capture_default_str();
  viz->add_option("--k", viz_fe.k)->capture_default_str();
  viz->add_option("--n-exp", viz_fe.n_exp)->capture_default_str();
  viz->add_option("--d-model", d_model, "PE width for pe mode")->capture_default_str();
  viz->add_option("--power", power, "PE power for pe mode")->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "Serial vs data-parallel sector patch generation");
  spe::BenchConfig bench_cfg;
  std::string bench_csv;
  bench->add_option("--batch", bench_cfg.batch_sizes, "Batch sizes")->delimiter(',')->capture_default_str();
  bench->add_option("--rings", bench_cfg.rings)->capture_default_str();
  bench->add_option("--rings-per-band", bench_cfg.rings_per_band)->capture_default_str();
  bench->add_option("--angular-mult", bench_cfg.angular_mult)->capture_default_str();
  bench->add_option("--side", bench_cfg.side, "Synthetic image side")->capture_default_str();
  bench->add_option("--reps", bench_cfg.reps, "Timed repetitions (median reported)")->capture_default_str();
  bench->add_option("--seed", bench_cfg.seed)->capture_default_str();
  bench->add_option("--csv", bench_csv, "Write the report as CSV");

  // forward
  auto* forward = app.add_subcommand("forward", "Run a forward pass and print class logits");
  std::string fwd_image, fwd_model = "vit", fwd_preset = "tiny", fwd_config, fwd_attn, fwd_out;
  std::uint64_t seed = 0;
  forward->add_option("--image", fwd_image, "Input image (PNG or PPM)")->required();
  forward->add_option("--model", fwd_model)->check(CLI::IsMember({"vit", "pvt"}))->capture_default_str();
  forward->add_option("--preset", fwd_preset)
      ->check(CLI::IsMember({"tiny", "base", "pvt-tiny"}))
      ->capture_default_str();
  forward->add_option("--config", fwd_config, "Encoder config JSON (overrides --preset)");
  forward->add_option("--seed", seed, "Weight initialization seed")->capture_default_str();
  forward->add_option("--attn-dir", fwd_attn, "Write attention maps as CSV into this directory");
  forward->add_option("--out", fwd_out, "Write logits JSON here instead of stdout");

  // layout
  auto* layout_cmd = app.add_subcommand("layout", "Export a sector patch layout");
  LayoutFlags layout_flags;
  std::string layout_out, grid_csv, pe_csv;
  int pe_dim = 256;
  double pe_power = 1.0;
  layout_flags.add(layout_cmd);
  layout_cmd->add_option("--out", layout_out, "Layout JSON (stdout when omitted)");
  layout_cmd->add_option("--grid-csv", grid_csv, "Sampling grid CSV (n,j,r,theta,x,y)");
  layout_cmd->add_option("--pe-csv", pe_csv, "Polar PE matrix CSV over token anchors");
  layout_cmd->add_option("--d-model", pe_dim)->capture_default_str();
  layout_cmd->add_option("--power", pe_power)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*warp) {
      const auto summary = spe::cmd_warp(warp_in, warp_out, warp_fe.params(), sweep, workers, &std::cerr);
      std::cerr << "warp: wrote " << summary.written << " file(s), " << summary.failed << " failure(s)\n";
      return summary.failed == 0 ? 0 : 1;
    }

    if (*density) {
      const auto params = dens_fe.params();
      const auto map = spe::density_map(params, eval_frac, workers);
      if (!dens_csv.empty()) {
        std::ofstream os(dens_csv);
        spe::write_density_csv(os, map);
      }
      if (!dens_png.empty()) spe::write_png(dens_png, spe::render_density(map, params));
      nlohmann::json profile = nlohmann::json::array();
      const auto bins_v = spe::radial_profile(map, bins);
      for (std::size_t b = 0; b < bins_v.size(); ++b) {
        profile.push_back({{"lo", double(b) / bins}, {"hi", double(b + 1) / bins},
                           {"mean_density", bins_v[b] ? nlohmann::json(*bins_v[b]) : nlohmann::json()}});
      }
      std::cout << nlohmann::json{{"retained", map.retained()}, {"profile", profile}}.dump(2) << '\n';
      return 0;
    }

    if (*viz) {
      std::size_t marks = 0;
      if (viz_mode == "grid") {
        const int side = static_cast<int>(std::ceil(2.0 * viz_layout.radius)) + 1;
        const auto grid = spe::build_grid(viz_layout.rings, viz_layout.radius,
                                          {0.5 * (side - 1), 0.5 * (side - 1)});
        auto r = spe::render_grid(grid, side, side);
        spe::write_png(viz_out, r.image);
        marks = r.marks;
      } else if (viz_mode == "patches") {
        const auto layout = viz_layout.build();
        auto r = spe::render_patches(layout, viz_image.empty() ? spe::Image8{} : spe::read_image(viz_image));
        spe::write_png(viz_out, r.image);
        marks = r.marks;
      } else if (viz_mode == "density") {
        const auto params = viz_fe.params();
        spe::write_png(viz_out, spe::render_density(spe::density_map(params, 0.95, workers), params));
      } else {
        const auto layout = viz_layout.build();
        const spe::PosEncConfig cfg{d_model, power, layout.radius()};
        const auto matrix = spe::polar_pe_matrix(spe::layout_anchors(layout), cfg);
        spe::write_png(viz_out, spe::render_matrix(matrix, static_cast<int>(layout.patch_count()), d_model));
        marks = layout.patch_count();
      }
      std::cout << nlohmann::json{{"mode", viz_mode}, {"out", viz_out}, {"marks", marks}}.dump() << '\n';
      return 0;
    }

    if (*bench) {
      bench_cfg.workers = workers;
      const auto report = spe::run_bench(bench_cfg);
      report.write_csv(std::cout);
      if (!bench_csv.empty()) {
        std::ofstream os(bench_csv);
        report.write_csv(os);
      }
      return 0;
    }

    if (*forward) {
      spe::EncoderConfig cfg;
      if (!fwd_config.empty()) {
        std::ifstream is(fwd_config);
        if (!is) throw std::runtime_error("cannot read " + fwd_config);
        cfg = spe::config_from_json(nlohmann::json::parse(is));
      } else if (fwd_preset == "base") {
        cfg = spe::EncoderConfig::vit_base16();
      } else if (fwd_preset == "pvt-tiny") {
        cfg = spe::EncoderConfig::pvt_tiny();
      } else {
        cfg = spe::EncoderConfig::vit_tiny();
      }
      spe::AttentionRecorder recorder;
      const auto img = spe::read_image(fwd_image);
      const auto result = spe::cmd_forward(img, fwd_model == "vit" ? spe::ModelKind::vit : spe::ModelKind::pvt, cfg,
                                           seed, fwd_attn.empty() ? nullptr : &recorder);
      if (!fwd_attn.empty()) {
        std::filesystem::create_directories(fwd_attn);
        recorder.write_csv(fwd_attn);
      }
      const std::string text = result.dump(2) + "\n";
      if (fwd_out.empty()) {
        std::cout << text;
      } else {
        write_text(fwd_out, text);
      }
      return 0;
    }

    if (*layout_cmd) {
      const auto layout = layout_flags.build();
      const std::string text = spe::layout_to_json(layout).dump(2) + "\n";
      if (layout_out.empty()) {
        std::cout << text;
      } else {
        write_text(layout_out, text);
      }
      if (!grid_csv.empty()) {
        std::ofstream os(grid_csv);
        spe::write_grid_csv(os, layout.grid());
      }
      if (!pe_csv.empty()) {
        const spe::PosEncConfig cfg{pe_dim, pe_power, layout.radius()};
        std::ofstream os(pe_csv);
        spe::write_pe_csv(os, spe::polar_pe_matrix(spe::layout_anchors(layout), cfg), pe_dim);
      }
      return 0;
    }
  } catch (const spe::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const spe::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
