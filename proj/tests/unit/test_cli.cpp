#include "oracles.hpp"

#include "cli.hpp"
#include "tweezer/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <sstream>

using namespace tweezer;
using Json = nlohmann::json;

namespace {

const std::filesystem::path kData = TWEEZER_TEST_DATA_DIR;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;

  [[nodiscard]] Json json() const { return Json::parse(out); }
  [[nodiscard]] std::string error() const { return Json::parse(err).at("error").get<std::string>(); }
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string str(const std::filesystem::path& p) { return p.string(); }

/// Writes a 3x3 offset bilayer with reservoirs and returns its path.
std::filesystem::path bilayer_file(const std::filesystem::path& dir) {
  const auto path = dir / "bilayer.json";
  const auto r = run({"gen-geometry", "--preset", "bilayer_square_offset", "--n", "3", "3", "--spacing", "6", "6",
                      "5", "--reservoir", "2", "-o", str(path)});
  EXPECT_EQ(r.code, 0) << r.err;
  return path;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto none = run({});
  EXPECT_EQ(none.code, 2);
  const auto bogus = run({"frobnicate"});
  EXPECT_EQ(bogus.code, 2);
  EXPECT_EQ(bogus.error(), "usage");
  EXPECT_EQ(run({"gen-geometry", "--preset", "dodecahedron"}).code, 2);
  EXPECT_EQ(run({"gen-geometry"}).code, 2);
}

TEST(Cli, GenGeometryPrintsLayoutOrSummary) {
  const auto printed = run({"gen-geometry", "--preset", "cubic", "--n", "2", "2", "2", "--spacing", "10", "10", "17"});
  ASSERT_EQ(printed.code, 0) << printed.err;
  const auto layout = layout_from_json(printed.out);
  EXPECT_EQ(layout.size(), 8u);

  const auto dir = oracle::scratch_dir("cli_gen");
  const auto r = run({"gen-geometry", "--preset", "cubic", "--n", "2", "2", "2", "--spacing", "10", "10", "17", "-o",
                      str(dir / "c.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  EXPECT_EQ(j.at("traps"), 8);
  EXPECT_EQ(j.at("planes"), 2);
  EXPECT_EQ(j.at("mt_safe"), true);
  EXPECT_EQ(read_layout(dir / "c.json"), layout);

  const auto imported = run({"gen-geometry", "--import", str(kData / "small_layout.json")});
  ASSERT_EQ(imported.code, 0);
  EXPECT_EQ(layout_from_json(imported.out).size(), 4u);
}

TEST(Cli, GenGeometryRejectsInvalidLayouts) {
  const auto r = run({"gen-geometry", "--preset", "cubic", "--n", "3", "3", "3", "--spacing", "2", "10", "17"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error(), "layout_invalid");
  EXPECT_EQ(run({"gen-geometry", "--preset", "cubic", "--n", "10", "10", "3", "--max-traps", "200"}).code, 2);
}

TEST(Cli, RotateFixFindsAnAngleForTheDenseCube) {
  const auto dir = oracle::scratch_dir("cli_rotate");
  const auto r = run({"gen-geometry", "--preset", "cubic", "--n", "5", "5", "5", "--spacing", "10", "10", "5",
                      "--rotate-fix", "--r-safe", "2", "-o", str(dir / "r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  EXPECT_GT(j.at("rotation").at("angle_deg").get<double>(), 0.0);
  EXPECT_LE(j.at("rotation").at("angle_deg").get<double>(), 45.0);
  EXPECT_EQ(j.at("mt_safe"), true);
}

TEST(Cli, RotateFixFailureIsAValidationError) {
  const auto r = run({"gen-geometry", "--preset", "cubic", "--n", "5", "5", "5", "--spacing", "10", "10", "5",
                      "--rotate-fix", "--r-safe", "3"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error(), "layout_invalid");
}

TEST(Cli, HologramWritesMaskReportAndVolume) {
  const auto dir = oracle::scratch_dir("cli_holo");
  const auto layout = str(kData / "small_layout.json");
  const auto r = run({"hologram", layout, "--mask", str(dir / "m.pgm"), "--report", str(dir / "r.json"), "--volume",
                      "-8,-8,-4,8,8,4", "--volume-res", "17,17,5", "--volume-out", str(dir / "v.f32")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(r.json().at("rms").get<double>(), 0.05);
  EXPECT_TRUE(r.json().at("converged").get<bool>());
  const auto mask = import_phase_pgm(dir / "m.pgm");
  EXPECT_EQ(mask.nx, 512);
  const auto report = Json::parse(read_text_file(dir / "r.json"));
  EXPECT_EQ(report.at("per_trap").size(), 4u);
  const auto vol = read_volume(dir / "v.f32");
  EXPECT_EQ(vol.nx * vol.ny * vol.nz, 17 * 17 * 5);

  const auto mip = run({"render-mip", str(dir / "v.f32"), "-o", str(dir / "mip.pgm")});
  ASSERT_EQ(mip.code, 0) << mip.err;
  const auto img = read_pgm(dir / "mip.pgm");
  EXPECT_EQ(img.width, 17);
  EXPECT_EQ(*std::max_element(img.samples.begin(), img.samples.end()), 65535);
}

TEST(Cli, HologramExitCodes) {
  const auto layout = str(kData / "small_layout.json");
  const auto missed = run({"hologram", layout, "--iters", "1", "--target-rms", "1e-9"});
  EXPECT_EQ(missed.code, 1);
  EXPECT_FALSE(missed.json().at("converged").get<bool>());
  EXPECT_EQ(run({"hologram", layout, "--volume", "0,0,0,1,1,1"}).code, 2);
  EXPECT_EQ(run({"hologram", layout, "--volume", "0,0", "--volume-out", "x"}).code, 2);
  // 200 um pixels address at most lambda f / (2 pitch) = 21.25 um; the traps sit at +-30 um
  const auto dir = oracle::scratch_dir("cli_paraxial");
  ASSERT_EQ(run({"gen-geometry", "--preset", "cubic", "--n", "2", "1", "1", "--spacing", "60", "10", "17", "-o",
                 str(dir / "wide.json")})
                .code,
            0);
  const auto paraxial = run({"hologram", str(dir / "wide.json"), "--pitch", "200"});
  EXPECT_EQ(paraxial.code, 2);
  EXPECT_EQ(paraxial.error(), "paraxial_violation");
  const auto missing = run({"hologram", str(kData / "nope.json")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(missing.error(), "io_error");
}

TEST(Cli, HologramClosedLoopFeedback) {
  const auto dir = oracle::scratch_dir("cli_feedback");
  write_text_file(dir / "m.json", "[1.2, 0.8, 1.0, 1.0]");
  const auto r = run({"hologram", str(kData / "small_layout.json"), "--measured", str(dir / "m.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  write_text_file(dir / "bad.json", "[1.0]");
  EXPECT_EQ(run({"hologram", str(kData / "small_layout.json"), "--measured", str(dir / "bad.json")}).code, 2);
  write_text_file(dir / "junk.json", "[1.0,");
  EXPECT_EQ(run({"hologram", str(kData / "small_layout.json"), "--measured", str(dir / "junk.json")}).error(),
            "parse_error");
}

TEST(Cli, LoadingPlanningAndDetectionChain) {
  const auto dir = oracle::scratch_dir("cli_chain");
  const auto layout = bilayer_file(dir);
  const auto occ_path = dir / "occ.json";
  const auto load =
      run({"simulate-loading", "--layout", str(layout), "--seed", "4", "-o", str(occ_path), "--stack-dir",
           str(dir / "stack")});
  ASSERT_EQ(load.code, 0) << load.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "stack" / "plane_0.pgm"));
  EXPECT_TRUE(std::filesystem::exists(dir / "stack" / "plane_1.pgm"));

  const auto det = run({"detect", "--layout", str(layout), "--stack", str(dir / "stack" / "stack.json")});
  ASSERT_EQ(det.code, 0) << det.err;
  EXPECT_EQ(occupancy_from_json(det.out), occupancy_from_json(read_text_file(occ_path)));

  const auto plan = run({"plan-assembly", "--layout", str(layout), "--occupancy", str(occ_path), "-o",
                         str(dir / "plan.json")});
  const auto occ = occupancy_from_json(read_text_file(occ_path));
  const auto lay = read_layout(layout);
  const auto planes = decompose_planes(lay);
  bool enough = true;
  for (const auto& p : planes.planes) {
    std::size_t atoms = 0;
    std::size_t targets = 0;
    for (auto t : p.traps) {
      atoms += occ[t] ? 1 : 0;
      targets += lay[t].is_target ? 1 : 0;
    }
    enough = enough && atoms >= targets;
  }
  if (enough) {
    ASSERT_EQ(plan.code, 0) << plan.err;
    const auto filled = apply_plan_lossless(occ, plan_from_json(read_text_file(dir / "plan.json")));
    for (std::size_t t = 0; t < lay.size(); ++t) {
      EXPECT_EQ(filled[t], lay[t].is_target);
    }
  } else {
    EXPECT_EQ(plan.code, 3);
    EXPECT_EQ(plan.error(), "insufficient_atoms");
  }
}

TEST(Cli, PlanAssemblyInsufficientAtomsAndRemoveAll) {
  const auto dir = oracle::scratch_dir("cli_plan");
  const auto layout = bilayer_file(dir);
  const auto n = read_layout(layout).size();
  Occupancy none(n, false);
  write_text_file(dir / "none.json", occupancy_to_json(none));
  const auto r = run({"plan-assembly", "--layout", str(layout), "--occupancy", str(dir / "none.json")});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.error(), "insufficient_atoms");

  Occupancy all(n, true);
  write_text_file(dir / "all.json", occupancy_to_json(all));
  const auto rm =
      run({"plan-assembly", "--layout", str(layout), "--occupancy", str(dir / "all.json"), "--remove-all", "0"});
  ASSERT_EQ(rm.code, 0) << rm.err;
  const auto plan = plan_from_json(rm.out);
  const auto after = apply_plan_lossless(all, plan);
  const auto planes = decompose_planes(read_layout(layout));
  for (auto t : planes.planes[0].traps) {
    EXPECT_FALSE(after[t]);
  }
  for (auto t : planes.planes[1].traps) {
    EXPECT_TRUE(after[t]);
  }
  write_text_file(dir / "short.json", occupancy_to_json(Occupancy(3, true)));
  EXPECT_EQ(run({"plan-assembly", "--layout", str(layout), "--occupancy", str(dir / "short.json")}).code, 2);
  EXPECT_EQ(run({"plan-assembly", "--layout", str(layout), "--occupancy", str(dir / "all.json"), "--metric", "manhattan"})
                .code,
            2);
}

TEST(Cli, RunExperimentIsSeedDeterministic) {
  const auto dir = oracle::scratch_dir("cli_run");
  const auto cfg = str(kData / "experiment.json");
  const auto a = run({"run-experiment", cfg, "--shots", "50", "--seed", "3", "-o", str(dir / "a.csv")});
  const auto b = run({"--threads", "2", "run-experiment", cfg, "--shots", "50", "--seed", "3", "-o", str(dir / "b.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_text_file(dir / "a.csv"), read_text_file(dir / "b.csv"));
  EXPECT_EQ(a.out, b.out);
  const auto c = run({"run-experiment", cfg, "--shots", "50", "--seed", "4", "-o", str(dir / "c.csv")});
  EXPECT_NE(read_text_file(dir / "a.csv"), read_text_file(dir / "c.csv"));
  const auto j = a.json();
  EXPECT_EQ(j.at("shots"), 50);
  EXPECT_GT(j.at("rep_rate_hz").get<double>(), 0.0);
}

TEST(Cli, RunExperimentErrors) {
  const auto dir = oracle::scratch_dir("cli_run_bad");
  write_text_file(dir / "bad.json", R"({"layout":"x.json","colour":3})");
  const auto r = run({"run-experiment", str(dir / "bad.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error(), "parse_error");
  EXPECT_EQ(run({"run-experiment", str(kData / "experiment.json"), "--p-load", "0"}).code, 2);
  EXPECT_EQ(run({"run-experiment", str(kData / "experiment.json"), "--shots", "0"}).code, 2);
}

TEST(Cli, RecaptureCurveShape) {
  const auto r = run({"recapture-curve", "--dz", "0:20:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "dz_um,recapture_probability");
  double prev = -1.0;
  int rows = 0;
  while (std::getline(lines, line)) {
    const double p = std::stod(line.substr(line.find(',') + 1));
    EXPECT_GE(p, prev);
    prev = p;
    ++rows;
    if (rows == 1) {
      EXPECT_NEAR(p, 0.01, 1e-3);
    }
    if (line.rfind("17,", 0) == 0) {
      EXPECT_NEAR(p, 0.99, 1e-3);
    }
  }
  EXPECT_EQ(rows, 21);
  const auto reduced = run({"recapture-curve", "--dz", "14:14:1", "--power", "reduced"});
  EXPECT_NEAR(std::stod(reduced.out.substr(reduced.out.rfind(',') + 1)), 0.99, 1e-3);
  EXPECT_EQ(run({"recapture-curve", "--dz", "5:1:1"}).code, 2);
  EXPECT_EQ(run({"recapture-curve", "--power", "half"}).code, 2);
}

TEST(Cli, DetectRejectsMismatchedStacks) {
  const auto dir = oracle::scratch_dir("cli_detect");
  const auto layout = bilayer_file(dir);
  ASSERT_EQ(run({"simulate-loading", "--layout", str(layout), "--stack-dir", str(dir / "s")}).code, 0);
  const auto r = run({"detect", "--layout", str(kData / "small_layout.json"), "--stack", str(dir / "s" / "stack.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run({"detect", "--layout", str(layout), "--stack", str(dir / "missing.json")}).code, 2);
}
