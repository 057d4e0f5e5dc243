#include "cli.hpp"

#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <optional>

#include "oracles.hpp"
#include "wdro/config.hpp"
#include "wdro/export.hpp"
#include "wdro/harness.hpp"
#include "wdro/rng.hpp"
#include "wdro/studies.hpp"

namespace wdro::cli {

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string study;
  std::string dro;
  std::optional<std::size_t> mutants;
  bool full_scale = false;
  std::string out = "out";
};

void add_config_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Config file (sectioned key = value)");
  cmd->add_option("--set", c.sets, "Override, section.key=value (repeatable)");
  cmd->add_option("--study", c.study, "battery or vehicle")
      ->check(CLI::IsMember({"battery", "vehicle"}));
}

void add_run_options(CLI::App* cmd, Common& c) {
  add_config_options(cmd, c);
  cmd->add_option("--dro", c.dro, "on or off")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--mutants", c.mutants, "ES mutants per step");
  cmd->add_flag("--paper-scale", c.full_scale, "250k/750k mutants and seeds 1..10");
  cmd->add_option("--out", c.out, "Output directory");
}

// File, then the named flags, then --set, so --set always wins.
ExperimentConfig build_config(const Common& c, const std::string& seeds) {
  ExperimentConfig config;
  if (!c.config_path.empty()) config = load_config(c.config_path);
  if (!c.study.empty()) apply_override(config, "general.study", c.study);
  if (c.full_scale) apply_full_scale(config);
  if (!c.dro.empty()) apply_override(config, "general.dro", c.dro);
  if (!seeds.empty()) apply_override(config, "general.seeds", seeds);
  if (c.mutants) apply_override(config, "es.mutants", std::to_string(*c.mutants));
  for (const auto& s : c.sets) apply_assignment(config, s);
  config.validate();
  return config;
}

int execute_batch(const ExperimentConfig& config, const std::string& out_dir, std::ostream& out,
                  std::ostream& err) {
  const BatchResult batch = run_batch(config);
  const auto files = export_batch(batch, config, out_dir);
  out << to_string(config.study) << ", DRO " << (config.dro_enabled ? "on" : "off") << ", "
      << batch.metrics.size() << " run(s)\n";
  out << summary_csv(batch, config.timing_in_summary);
  int failed = 0;
  for (const auto& m : batch.metrics) {
    if (m.failed) {
      ++failed;
      err << "seed " << m.seed << " failed: " << m.error << "\n";
    }
  }
  for (const auto& log : batch.logs) {
    if (!log.warnings.empty()) {
      out << "seed " << log.seed << ": " << log.warnings.size() << " warning(s), see "
          << run_basename(log) << "_warnings.txt\n";
    }
  }
  out << "wrote " << files.size() << " file(s) to " << out_dir << "\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wasserstein-robust learned MPC experiments", "wdro"};
  app.require_subcommand(1);

  Common run_opts;
  std::uint64_t run_seed = 1;
  auto* run_cmd = app.add_subcommand("run", "One episode");
  add_run_options(run_cmd, run_opts);
  run_cmd->add_option("--seed", run_seed, "Episode seed");

  Common batch_opts;
  std::string batch_seeds;
  auto* batch_cmd = app.add_subcommand("batch", "Seeded episodes plus a summary table");
  add_run_options(batch_cmd, batch_opts);
  batch_cmd->add_option("--seeds", batch_seeds, "Seed list, e.g. 1..3 or 1,4,9");

  Common field_opts;
  std::uint64_t field_seed = 1;
  std::string field_out;
  auto* field_cmd = app.add_subcommand("gen-field", "Write the obstacle field of a vehicle seed");
  add_config_options(field_cmd, field_opts);
  field_cmd->add_option("--seed", field_seed, "Episode seed the field belongs to");
  field_cmd->add_option("--out", field_out, "Output file (default field_seed<N>.txt)");

  std::uint64_t verify_seed = 1;
  auto* verify_cmd = app.add_subcommand("verify", "Cross-check against the reference oracles");
  verify_cmd->add_option("--seed", verify_seed, "Seed for the random instances");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*run_cmd) {
      const auto config = build_config(run_opts, std::to_string(run_seed));
      return execute_batch(config, run_opts.out, out, err);
    }
    if (*batch_cmd) {
      const auto config = build_config(batch_opts, batch_seeds);
      return execute_batch(config, batch_opts.out, out, err);
    }
    if (*field_cmd) {
      Common c = field_opts;
      c.study = "vehicle";
      const auto config = build_config(c, "");
      const StudyDefinition study = make_study(config, field_seed);
      const std::filesystem::path path =
          field_out.empty() ? "field_seed" + std::to_string(field_seed) + ".txt" : field_out;
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      study.field->write_text(path);
      out << "field " << study.field->nodes() << "x" << study.field->nodes() << " at "
          << study.field->resolution() << " m, cutoff " << study.field->cutoff() << ", "
          << study.field->attempts() << " draw(s), written to " << path.string() << "\n";
      return kExitOk;
    }
    if (*verify_cmd) {
      const auto results = oracle::run_verify_suite(verify_seed);
      int passed = 0;
      for (const auto& r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        passed += r.passed;
      }
      out << "verify: " << passed << "/" << results.size() << " checks passed\n";
      return passed == static_cast<int>(results.size()) ? kExitOk : kExitFailure;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace wdro::cli
