#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spe/bench.hpp"
#include "spe/commands.hpp"

using namespace spe;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spe_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

FisheyeParams small_params() {
  FisheyeParams p;
  p.out_radius = 16;
  return p;
}

}  // namespace

TEST(Warp, EmptyDirectoryWritesEmptyManifest) {
  const auto dir = scratch("empty");
  fs::create_directories(dir / "in");
  const auto s = cmd_warp(dir / "in", dir / "out", small_params());
  EXPECT_EQ(s.written, 0u);
  EXPECT_EQ(s.failed, 0u);
  ASSERT_TRUE(fs::exists(dir / "out" / "manifest.json"));
  const auto m = nlohmann::json::parse(std::ifstream(dir / "out" / "manifest.json"));
  EXPECT_TRUE(m["files"].empty());
  fs::remove_all(dir);
}

TEST(Warp, SweepWritesOneFilePerImageAndK) {
  const auto dir = scratch("sweep");
  fs::create_directories(dir / "in");
  const auto images = synthetic_batch(3, 24, 5);
  for (int i = 0; i < 3; ++i) write_image((dir / "in" / ("img" + std::to_string(i) + ".png")).string(), images[i]);
  const auto s = cmd_warp(dir / "in", dir / "out", small_params(), {0.05, 0.2});
  EXPECT_EQ(s.written, 6u);
  EXPECT_EQ(s.failed, 0u);
  EXPECT_TRUE(fs::exists(dir / "out" / "k_0.0500" / "img0.png"));
  EXPECT_TRUE(fs::exists(dir / "out" / "k_0.2000" / "img2.png"));
  const auto m = nlohmann::json::parse(std::ifstream(dir / "out" / "manifest.json"));
  ASSERT_EQ(m["files"].size(), 6u);
  EXPECT_EQ(m["files"][1]["k"], 0.2);
  EXPECT_EQ(m["files"][1]["in_width"], 24);
  const auto out = read_image((dir / "out" / "k_0.0500" / "img1.png").string());
  EXPECT_EQ(out.width(), 32);
  fs::remove_all(dir);
}

TEST(Warp, UnreadableFilesAreCountedNotFatal) {
  const auto dir = scratch("bad");
  fs::create_directories(dir / "in");
  write_image((dir / "in" / "good.ppm").string(), synthetic_batch(1, 8, 1).front());
  std::ofstream(dir / "in" / "broken.png") << "garbage";
  std::ostringstream log;
  const auto s = cmd_warp(dir / "in", dir / "out", small_params(), {}, 1, &log);
  EXPECT_EQ(s.written, 1u);
  EXPECT_EQ(s.failed, 1u);
  EXPECT_NE(log.str().find("broken.png"), std::string::npos);
  EXPECT_EQ(s.manifest["failures"][0]["source"], "broken.png");
  fs::remove_all(dir);
}

TEST(Warp, ConstantInputGivesConstantDisc) {
  const auto dir = scratch("const");
  fs::create_directories(dir / "in");
  write_image((dir / "in" / "c.png").string(), Image8(40, 40, 3, 90));
  cmd_warp(dir / "in", dir / "out", small_params());
  const auto out = read_image((dir / "out" / "c.png").string());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const double u = output_px_to_norm(x, 16), v = output_px_to_norm(y, 16);
      if (u * u + v * v <= 1.0) {
        EXPECT_NEAR(out.at(x, y, 1), 90, 1);
      } else {
        EXPECT_EQ(out.at(x, y, 1), 0);
      }
    }
  }
  fs::remove_all(dir);
}

TEST(Warp, RejectsNonInvertibleSweepAndMissingInput) {
  const auto dir = scratch("reject");
  fs::create_directories(dir / "in");
  EXPECT_THROW(cmd_warp(dir / "in", dir / "out", small_params(), {0.1, 0.6}), ConfigError);
  EXPECT_THROW(cmd_warp(dir / "nope", dir / "out", small_params()), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Forward, DeterministicAndShaped) {
  const auto img = synthetic_batch(1, 32, 9).front();
  const auto cfg = EncoderConfig::vit_tiny();
  const auto a = cmd_forward(img, ModelKind::vit, cfg, 7);
  const auto b = cmd_forward(img, ModelKind::vit, cfg, 7);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["logits"].size(), 10u);
  EXPECT_NE(a.dump(), cmd_forward(img, ModelKind::vit, cfg, 8).dump());
}

TEST(Forward, PvtMatchesVitOnSingleStage) {
  const auto img = synthetic_batch(1, 32, 10).front();
  const auto cfg = EncoderConfig::vit_tiny();
  const auto vit = cmd_forward(img, ModelKind::vit, cfg, 3)["logits"].get<std::vector<double>>();
  const auto pvt = cmd_forward(img, ModelKind::pvt, cfg, 3)["logits"].get<std::vector<double>>();
  ASSERT_EQ(vit.size(), pvt.size());
  for (std::size_t i = 0; i < vit.size(); ++i) EXPECT_NEAR(vit[i], pvt[i], 1e-12);
  EXPECT_THROW(cmd_forward(img, ModelKind::vit, EncoderConfig::pvt_tiny(), 3), ConfigError);
}

TEST(Forward, RecordsAttentionMaps) {
  const auto dir = scratch("attn");
  AttentionRecorder rec;
  cmd_forward(synthetic_batch(1, 64, 11).front(), ModelKind::pvt, EncoderConfig::pvt_tiny(), 1, &rec);
  const auto paths = rec.write_csv(dir.string());
  EXPECT_EQ(paths.size(), 6u);
  EXPECT_TRUE(fs::exists(dir / "attn_s1_l0_h3.csv"));
  std::ifstream in(dir / "attn_s0_l0_h0.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 256u);
  fs::remove_all(dir);
}
