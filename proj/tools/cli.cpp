#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "checks.hpp"
#include "vehdet/analysis.hpp"
#include "vehdet/detect.hpp"
#include "vehdet/eval.hpp"
#include "vehdet/reports.hpp"
#include "vehdet/weights.hpp"

namespace vehdet {

namespace {

struct Options {
  std::string config;
  std::string weights;
  std::optional<std::uint64_t> seed;
  std::string image;
  std::string out;
  bool tile = false;
  int tile_size = 512;
  int overlap = 100;
  bool ablation_grid = false;
  bool json = false;
  bool per_layer = false;
  std::string dets;
  std::string gt;
  bool ap = false;
  double iou = 0.5;
  bool all_checks = false;
};

NetworkConfig config_of(const Options& o) {
  return o.config.empty() ? NetworkConfig{} : load_config(o.config);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("failed writing " + path);
}

int run_detect(const Options& o, std::ostream& out) {
  const NetworkConfig cfg = config_of(o);
  const Network net = o.weights.empty()
                          ? build_network(cfg, *o.seed)
                          : build_network(cfg, load_weights(o.weights, blob_path_for(o.weights)));
  const RgbImage image = load_png(o.image);
  const auto dets = detect(net, generate_priors(cfg), image, {o.tile, o.tile_size, o.overlap});
  const std::string id = std::filesystem::path(o.image).stem().string();
  write_file(o.out, detections_to_json(id, dets).dump(2) + "\n");
  out << dets.size() << " detections written to " << o.out << "\n";
  return 0;
}

int run_init_weights(const Options& o, std::ostream& out) {
  const Network net = build_network(config_of(o), *o.seed);
  save_weights(net, o.out, blob_path_for(o.out));
  out << net.params().size() << " tensors written to " << o.out << " and "
      << blob_path_for(o.out).string() << "\n";
  return 0;
}

int run_flops(const Options& o, std::ostream& out) {
  const NetworkConfig cfg = config_of(o);
  if (o.json) {
    nlohmann::json j = flops_summary_json(cfg);
    if (o.per_layer) j["report"] = network_cost(cfg).to_json();
    if (o.ablation_grid) {
      j["dab_grid"] = ablation_to_json(ablation_table(dab_ablation_grid(cfg), dab_ablation_labels()));
      j["mincep_grid"] =
          ablation_to_json(ablation_table(mincep_ablation_grid(cfg), mincep_ablation_labels()));
    }
    out << j.dump(2) << "\n";
    return 0;
  }
  if (o.per_layer) out << network_cost(cfg).to_text(true) << "\n";
  out << flops_summary_text(cfg);
  if (o.ablation_grid) {
    out << "\nDAB grid\n"
        << ablation_to_text(ablation_table(dab_ablation_grid(cfg), dab_ablation_labels()));
    out << "\nmincep grid\n"
        << ablation_to_text(ablation_table(mincep_ablation_grid(cfg), mincep_ablation_labels()));
  }
  return 0;
}

int run_priors(const Options& o, std::ostream& out) {
  const NetworkConfig cfg = config_of(o);
  out << (o.json ? priors_report_json(cfg).dump(2) + "\n" : priors_report_text(cfg));
  return 0;
}

int run_eval(const Options& o, std::ostream& out) {
  std::ifstream f(o.dets);
  if (!f) throw IoError("cannot open " + o.dets);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(o.dets + ": " + e.what());
  }
  const AnnotationsByImage gts = load_annotations_csv(o.gt);
  DetectionsByImage dets;
  for (auto& [id, list] : detections_from_json(j)) dets[id] = std::move(list);
  // A detections array cannot list an image with no detections; such images count as empty.
  for (const auto& [id, _] : gts) dets.try_emplace(id);

  EvalSummary s = evaluate_counts(dets, gts);
  if (o.ap) s.ap = evaluate_ap(dets, gts, o.iou);
  if (o.json) {
    out << eval_to_json(s).dump(2) << "\n";
    return 0;
  }
  for (const ImageCount& c : s.per_image) {
    out << c.image_id << " predicted " << c.predicted << " ground truth " << c.ground_truth << "\n";
  }
  out << "MAE " << s.mae << "\nRMSE " << s.rmse << "\n";
  if (s.ap) out << "AP@" << o.iou << " " << *s.ap << "\n";
  return 0;
}

int run_selftest(const Options& o, std::ostream& out) {
  std::vector<checks::CheckResult> results;
  if (o.all_checks) {
    results = checks::run_all();
  } else {
    results = {checks::prior_count_audit(), checks::kernel_oracles(),
               checks::ssd_head_properties(), checks::tiling_pipeline(),
               checks::ablation_monotonicity(), checks::count_metrics()};
  }
  int failed = 0;
  for (const auto& r : results) {
    out << checks::format(r) << "\n";
    failed += !r.pass;
  }
  out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " passed\n";
  return failed ? 1 : 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Vehicle detector inference, cost analysis and evaluation", "vehdet"};
  app.require_subcommand(1);

  auto* detect_cmd = app.add_subcommand("detect", "Run the detector on a PNG image");
  detect_cmd->add_option("--config", o.config, "Network config JSON")->check(CLI::ExistingFile);
  auto* w = detect_cmd->add_option("--weights", o.weights, "Weight manifest (.json, blob beside it)")
                ->check(CLI::ExistingFile);
  auto* s = detect_cmd->add_option("--seed", o.seed, "Random-init seed instead of weights");
  w->excludes(s);
  detect_cmd->add_option("--image", o.image, "Input PNG")->required()->check(CLI::ExistingFile);
  detect_cmd->add_flag("--tile", o.tile, "Sliding-window inference");
  detect_cmd->add_option("--tile-size", o.tile_size, "Window side in pixels")->check(CLI::PositiveNumber);
  detect_cmd->add_option("--overlap", o.overlap, "Window overlap in pixels")->check(CLI::NonNegativeNumber);
  detect_cmd->add_option("--out", o.out, "Output detections JSON")->required();

  auto* init_cmd = app.add_subcommand("init-weights", "Write randomly initialised weights");
  init_cmd->add_option("--config", o.config, "Network config JSON")->check(CLI::ExistingFile);
  init_cmd->add_option("--seed", o.seed, "Random-init seed")->required();
  init_cmd->add_option("--out", o.out, "Manifest path (.json); the blob goes beside it")->required();

  auto* flops_cmd = app.add_subcommand("flops", "Analytic FLOP and parameter report");
  flops_cmd->add_option("--config", o.config, "Network config JSON")->check(CLI::ExistingFile);
  flops_cmd->add_flag("--ablation-grid", o.ablation_grid, "Also print the DAB and mincep grids");
  flops_cmd->add_flag("--per-layer", o.per_layer, "Include every layer");
  flops_cmd->add_flag("--json", o.json, "JSON output");

  auto* priors_cmd = app.add_subcommand("priors", "Per-tap and total default box counts");
  priors_cmd->add_option("--config", o.config, "Network config JSON")->check(CLI::ExistingFile);
  priors_cmd->add_flag("--json", o.json, "JSON output");

  auto* eval_cmd = app.add_subcommand("eval", "Count MAE/RMSE and optional AP");
  eval_cmd->add_option("--dets", o.dets, "Detections JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", o.gt, "Annotations CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_flag("--ap", o.ap, "Also compute average precision");
  eval_cmd->add_option("--iou", o.iou, "AP match threshold")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_flag("--json", o.json, "JSON output");

  auto* selftest_cmd = app.add_subcommand("selftest", "Run the oracle suites");
  selftest_cmd->add_flag("--all", o.all_checks, "Include the full-network checks");

  try {
    app.parse(argc, argv);
    if (detect_cmd->parsed() && o.weights.empty() && !o.seed) {
      throw CLI::ValidationError("detect", "one of --weights or --seed is required");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run 'vehdet --help' for usage\n";
    return 2;
  }

  try {
    if (detect_cmd->parsed()) return run_detect(o, out);
    if (init_cmd->parsed()) return run_init_weights(o, out);
    if (flops_cmd->parsed()) return run_flops(o, out);
    if (priors_cmd->parsed()) return run_priors(o, out);
    if (eval_cmd->parsed()) return run_eval(o, out);
    return run_selftest(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace vehdet
