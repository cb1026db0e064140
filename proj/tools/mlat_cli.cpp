#include "mlat/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kPipelineError = 3;
constexpr int kAssertFailed = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated micro-lens-array tactile sensor: experiments and metrology"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode = "both";
  std::optional<std::uint64_t> seed;
  bool assert_checks = false;

  const std::vector<std::pair<std::string, std::string>> verbs{
      {"sweep-z", "dot area versus marker distance, lens and pinhole"},
      {"sweep-xy", "dot centroid versus lateral step at several heights"},
      {"indent-normal", "normal presses, AF calibration"},
      {"indent-tangential", "sheared presses, TF calibration"},
      {"depth-demo", "glyph depth maps and two-stage press"},
      {"metrology", "slanted-edge MTF, bar contrast, foci uniformity"},
      {"stitch", "raw mosaic PPM to stitched image"},
      {"render", "render a scene to unit tiles and a mosaic"}};
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "experiment config (JSON)");
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "run seed (overrides seed)");
    sub->add_option("--mode", mode, "imaging mode")->check(CLI::IsMember({"lens", "pinhole", "both"}));
    sub->add_flag("--assert", assert_checks, "exit 4 when any acceptance check fails");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  mlat::ExperimentConfig config;
  try {
    mlat::Json doc = config_path.empty() ? mlat::Json::object() : mlat::resolve_includes(config_path);
    if (doc.contains("experiment") && doc["experiment"] != verb)
      throw mlat::ConfigError("config is for '" + doc["experiment"].dump() + "', not '" + verb + "'");
    doc["experiment"] = verb;
    if (seed) doc["seed"] = *seed;
    if (!out_dir.empty()) doc["output_dir"] = out_dir;
    config = mlat::parse_config(doc);
  } catch (const mlat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  mlat::RunOptions options;
  options.out_dir = config.output_dir;
  if (mode == "lens") options.modes = {mlat::ImagingMode::lens};
  else if (mode == "pinhole") options.modes = {mlat::ImagingMode::pinhole};

  try {
    const mlat::RunReport report = mlat::run_experiment(config, options);
    for (const auto& c : report.checks)
      std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << ' ' << c.value << ' ' << c.relation << ' ' << c.limit
                << '\n';
    std::cout << "wrote " << (options.out_dir / "summary.json").string() << " (config "
              << mlat::hash_hex(report.config_hash) << ")\n";
    if (assert_checks && !report.passed()) return kAssertFailed;
  } catch (const mlat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << '\n';
    return kPipelineError;
  }
  return kOk;
}
