// Command-line front end: headless replay, dataset generation, the
// interactive service, and ground-truth reports.

#include <csignal>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "hitl/dataset.hpp"
#include "hitl/service.hpp"
#include "hitl/session.hpp"

namespace {

using namespace hitl;

hitl::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int run_solve(const std::string& graph, const std::string& script, const std::string& out,
              const std::string& metrics, const std::string& truth, const SessionConfig& config) {
  const ReplaySummary summary = replay_files(graph, script, out, metrics, config, truth);
  const auto& first = summary.iterations.front();
  const auto& last = summary.iterations.back();
  std::cout << "corrections " << summary.iterations.size() - 1 << " inconsistency " << first.inconsistency << " -> "
            << last.inconsistency << " cost " << last.total_cost << '\n';
  if (summary.final_report) {
    std::cout << "mean angular error " << summary.final_report->mean_angle_error << " deg, mean translation error "
              << summary.final_report->mean_distance_error << " m\n";
  }
  return 0;
}

int run_generate(const std::string& kind, const std::string& config_path, const std::string& out,
                 std::string truth_out) {
  const std::string json = config_path.empty() ? "{}" : read_file(config_path);
  GeneratedDataset data;
  if (kind == "lost-poses") {
    data = generate_lost_poses(lost_poses_config_from_json(json));
  } else if (kind == "bent-hallway") {
    data = generate_bent_hallway(bent_hallway_config_from_json(json));
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown dataset '" + kind + "' (lost-poses, bent-hallway)");
  }
  if (truth_out.empty()) truth_out = std::filesystem::path(out).replace_extension(".truth").string();
  save_graph(data.graph, out);
  save_truth(data.truth, truth_out);
  std::cout << "poses " << data.graph.poses.size() << " points " << point_count(data.graph) << " -> " << out << ", "
            << truth_out << '\n';
  return 0;
}

int run_serve(const std::string& graph, const std::string& bind, const SessionConfig& config) {
  SessionService service(Session(load_graph(graph), config));
  Server server(service);
  const auto [host, port] = parse_bind_address(bind);
  server.listen(host, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << host << ':' << server.port() << std::endl;
  server.run();
  g_server = nullptr;
  return 0;
}

int run_report(const std::string& graph, const std::string& truth) {
  write_report(std::cout, ground_truth_report(load_graph(graph), load_truth(truth)));
  std::cout << "inconsistency " << total_inconsistency(load_graph(graph)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-in-the-loop pose-graph correction"};
  app.require_subcommand(1);

  SessionConfig config;
  auto add_tuning = [&](CLI::App* cmd) {
    cmd->add_option("--sigma", config.interpretation.sigma, "stroke accuracy, m")->capture_default_str();
    cmd->add_option("--tp", config.interpretation.t_p, "min selected points per pose")->capture_default_str();
    cmd->add_option("--k1", config.weights.k1, "offset weight")->capture_default_str();
    cmd->add_option("--k2", config.weights.k2, "alignment weight")->capture_default_str();
    cmd->add_option("--resolution", config.resolution, "inconsistency raster, m")->capture_default_str();
  };

  std::string graph, script, out, metrics, truth, config_path, bind = "127.0.0.1:8765", kind;
  std::uint64_t seed = 0;

  auto* solve = app.add_subcommand("solve", "replay a correction script on a graph");
  solve->add_option("--graph", graph)->required();
  solve->add_option("--script", script)->required();
  solve->add_option("--out", out)->required();
  solve->add_option("--metrics", metrics, "per-iteration metrics file");
  solve->add_option("--truth", truth, "ground-truth file; adds error reports to the metrics");
  solve->add_option("--seed", seed, "recorded only; the pipeline is deterministic");
  add_tuning(solve);

  auto* generate = app.add_subcommand("generate", "synthesize a dataset");
  generate->add_option("kind", kind, "lost-poses | bent-hallway")->required();
  generate->add_option("--config", config_path, "JSON config; absent keys keep defaults");
  generate->add_option("--out", out)->required();
  generate->add_option("--truth", truth, "ground-truth output (default: --out with extension .truth)");

  auto* serve = app.add_subcommand("serve", "serve a session over newline-delimited JSON/TCP");
  serve->add_option("--graph", graph)->required();
  serve->add_option("--bind", bind, "host:port")->capture_default_str();
  add_tuning(serve);

  auto* report = app.add_subcommand("report", "ground-truth errors and inconsistency of a graph");
  report->add_option("--graph", graph)->required();
  report->add_option("--truth", truth)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return run_solve(graph, script, out, metrics, truth, config);
    if (*generate) return run_generate(kind, config_path, out, truth);
    if (*serve) return run_serve(graph, bind, config);
    if (*report) return run_report(graph, truth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
