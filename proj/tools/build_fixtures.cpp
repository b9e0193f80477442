// Regenerates the checked-in fixtures: generated graphs with their ground
// truth, and correction scripts drawn the way a user would, one stroke pair
// at a time on the map as it stands after the previous correction.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hitl/dataset.hpp"
#include "hitl/session.hpp"

namespace {

using namespace hitl;

struct Step {
  CorrectionMode mode;
  std::string feature_a;
  std::string feature_b;
};

// A stroke over the current image of a feature: the middle 70% of its
// fitted extent, drawn slightly off the wall and slightly askew.
Segment stroke_over(const FactorGraph& graph, const FeatureSelector& refs, double offset, double skew) {
  const Segment fit = fit_selection(graph, refs);
  const Vec2 c = fit.center();
  const Vec2 d = fit.direction();
  const Vec2 n = fit.normal();
  const double half = 0.35 * fit.length();
  const Vec2 tilt = std::tan(skew) * n;
  return {c - half * (d + tilt) + offset * n, c + half * (d + tilt) + offset * n};
}

std::vector<RawCorrection> draw_script(const FactorGraph& graph, const GroundTruth& truth,
                                       const std::vector<Step>& steps) {
  Session session(graph);
  std::vector<RawCorrection> script;
  // Small, fixed hand errors: a few centimetres off the wall, a degree askew.
  const double offsets[] = {0.03, -0.02, 0.025, -0.03, 0.02};
  const double skews[] = {0.015, -0.01, 0.012, -0.015, 0.01};
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    RawCorrection raw;
    raw.mode = s.mode;
    raw.pa0 = stroke_over(session.graph(), truth.features.at(s.feature_a), offsets[k % 5], skews[k % 5]);
    raw.pb0 = stroke_over(session.graph(), truth.features.at(s.feature_b), -offsets[(k + 2) % 5],
                          -skews[(k + 2) % 5]);
    const MapUpdate u = session.submit_correction(raw);
    if (u.error) throw std::runtime_error("step " + std::to_string(k) + ": " + *u.error);
    script.push_back(raw);
  }
  return script;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

void report(const std::string& name, const FactorGraph& graph, const std::vector<RawCorrection>& script,
            const GroundTruth& truth) {
  const ReplaySummary summary = replay(graph, script, SessionConfig{}, nullptr, &truth);
  std::cout << "== " << name << '\n';
  write_metrics(std::cout, summary);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate fixtures"};
  std::string dir = "fixtures";
  bool show = false;
  app.add_option("--dir", dir, "output directory");
  app.add_flag("--report", show, "replay each script and print its metrics");
  CLI11_PARSE(app, argc, argv);

  try {
    const std::filesystem::path out(dir);
    std::filesystem::create_directories(out);

    const GeneratedDataset lost = generate_lost_poses(LostPosesConfig{});
    const std::vector<Step> lost_steps = {
        {CorrectionMode::Colocation, "S1", "S1r"},
        {CorrectionMode::Perpendicularity, "S2", "E1"},
        {CorrectionMode::Perpendicularity, "E1", "N2"},
        {CorrectionMode::Collinearity, "N2", "N1"},
        {CorrectionMode::Perpendicularity, "N1", "W1"},
    };
    const auto lost_script = draw_script(lost.graph, lost.truth, lost_steps);
    save_graph(lost.graph, (out / "lost_poses.graph").string());
    save_truth(lost.truth, (out / "lost_poses.truth").string());
    save_script(lost_script, (out / "lost_poses.script").string());
    write_text(out / "lost_poses.json", "{\"seed\": 1}\n");

    const GeneratedDataset hall = generate_bent_hallway(BentHallwayConfig{});
    const std::vector<Step> hall_steps = {
        {CorrectionMode::Collinearity, "S_west", "S_east"},
    };
    const auto hall_script = draw_script(hall.graph, hall.truth, hall_steps);
    save_graph(hall.graph, (out / "bent_hallway.graph").string());
    save_truth(hall.truth, (out / "bent_hallway.truth").string());
    save_script(hall_script, (out / "bent_hallway.script").string());
    write_text(out / "bent_hallway.json", "{\"seed\": 1, \"bias_deg\": 30.0}\n");

    if (show) {
      report("lost_poses", lost.graph, lost_script, lost.truth);
      report("bent_hallway", hall.graph, hall_script, hall.truth);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
