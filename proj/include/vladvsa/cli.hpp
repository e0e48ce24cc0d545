#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "vladvsa/checkpoint.hpp"
#include "vladvsa/config.hpp"
#include "vladvsa/gradsuite.hpp"
#include "vladvsa/harness.hpp"

namespace vladvsa {

// Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitIo = 3;

namespace cli_detail {

inline const char* kUsage =
    "usage: vladvsa <subcommand> [--config FILE] [--key value ...]\n"
    "\n"
    "subcommands:\n"
    "  gen-data   write one VVSAFEAT file per synthetic domain into data_dir\n"
    "  train      train on every domain except --holdout; writes checkpoint\n"
    "             and loss trace into out_dir\n"
    "  eval       score --checkpoint on the held-out domain; prints metrics\n"
    "  ablate     leave-one-domain-out sweep over gap/vlad/vs/va/vsa variants\n"
    "  gradcheck  finite-difference verification suite; nonzero exit on failure\n"
    "  stats      per-cluster assignment census and residual dump\n"
    "\n"
    "Flags beat config-file entries, which beat defaults. Keys match the\n"
    "config file keys; `--lambda X` sets lambda1..lambda5 at once. See\n"
    "README.md for the full key table.\n";

inline std::string domain_file(const Config& cfg, std::size_t domain) {
  return cfg.data_dir + "/domain_" + std::to_string(domain) + ".feat";
}

/// defaults -> --config file -> remaining flags, in command-line order.
inline Config resolve_config(const std::vector<std::string>& args) {
  Config cfg;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") parse_config_file(cfg, args[i + 1]);
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i].rfind("--", 0) != 0) {
      throw ConfigError("expected --key, got '" + args[i] + "'");
    }
    if (i + 1 >= args.size()) {
      throw ConfigError("flag '" + args[i] + "' is missing a value");
    }
    const std::string key = args[i].substr(2);
    if (key != "config") config_set(cfg, key, args[i + 1], "flag --" + key);
    ++i;
  }
  validate_config(cfg);
  return cfg;
}

inline std::vector<DomainDataset> load_domains(const Config& cfg,
                                               std::size_t skip_holdout) {
  std::vector<DomainDataset> out;
  for (std::size_t s = 1; s <= cfg.domains; ++s) {
    if (s == skip_holdout) continue;
    out.push_back(read_descriptors(domain_file(cfg, s)));
  }
  return out;
}

inline int cmd_gen_data(const Config& cfg) {
  const SyntheticSpec spec = to_synthetic_spec(cfg);
  const std::vector<DomainDataset> domains = generate_synthetic(spec);
  std::filesystem::create_directories(cfg.data_dir);
  for (std::size_t s = 0; s < domains.size(); ++s) {
    write_descriptors(domain_file(cfg, s + 1), domains[s]);
    if (cfg.export_csv) {
      write_dataset_csv(cfg.data_dir + "/domain_" + std::to_string(s + 1) + ".csv",
                        render_config_line(cfg), domains[s]);
    }
  }
  std::cout << "config: " << render_config_line(cfg) << "\n";
  std::cout << "wrote " << domains.size() << " domains x "
            << domains[0].size() << " samples to " << cfg.data_dir << "\n";
  return kExitOk;
}

inline int cmd_train(const Config& cfg) {
  const std::vector<DomainDataset> sources = load_domains(cfg, cfg.holdout);
  const TrainConfig tc = to_train_config(cfg);
  const TrainResult result = run_training(sources, tc);
  std::filesystem::create_directories(cfg.out_dir);
  save_checkpoint(cfg.out_dir + "/model.bin", result.params);
  write_loss_trace_csv(cfg.out_dir + "/loss_trace.csv", render_config_line(cfg),
                       result.trace);
  std::cout << "config: " << render_config_line(cfg) << "\n";
  std::cout << "trained " << cfg.iterations << " iterations on "
            << sources.size() << " source domains (holdout " << cfg.holdout
            << ")\n";
  if (!result.trace.empty()) {
    const TraceRow& last = result.trace.back();
    std::cout << "final: cls=" << format_double(last.values.cls)
              << " total=" << format_double(last.total) << "\n";
  }
  std::cout << "checkpoint: " << cfg.out_dir << "/model.bin\n";
  return kExitOk;
}

inline int cmd_eval(const Config& cfg) {
  if (cfg.checkpoint.empty()) {
    throw ConfigError("eval requires --checkpoint");
  }
  const ModelParams params = load_checkpoint(cfg.checkpoint);
  const DomainDataset target = read_descriptors(domain_file(cfg, cfg.holdout));
  const Metrics m = evaluate_metrics(params, target);
  std::filesystem::create_directories(cfg.out_dir);
  write_metrics_csv(cfg.out_dir + "/metrics.csv", render_config_line(cfg), m);
  std::cout << "config: " << render_config_line(cfg) << "\n";
  std::cout << "auc=" << format_double(m.auc) << " hter=" << format_double(m.hter)
            << " far=" << format_double(m.far) << " frr=" << format_double(m.frr)
            << " eer_threshold=" << format_double(m.eer_threshold) << "\n";
  return kExitOk;
}

inline int cmd_ablate(const Config& cfg) {
  const SyntheticSpec spec = to_synthetic_spec(cfg);
  const TrainConfig base = to_train_config(cfg);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < cfg.ablate_seeds; ++i) seeds.push_back(cfg.seed + i);
  const std::vector<AblationRow> rows = run_ablation(spec, base, seeds);
  const std::vector<AblationSummary> summary = summarize_ablation(rows);
  std::filesystem::create_directories(cfg.out_dir);
  write_ablation_csv(cfg.out_dir + "/ablation.csv", render_config_line(cfg), rows);
  write_ablation_summary_csv(cfg.out_dir + "/ablation_summary.csv",
                             render_config_line(cfg), summary);
  std::cout << "config: " << render_config_line(cfg) << "\n";
  for (Variant v : kAllVariants) {
    double auc = 0.0, hter = 0.0;
    std::size_t count = 0;
    for (const AblationRow& r : rows) {
      if (r.variant != v) continue;
      auc += r.metrics.auc;
      hter += r.metrics.hter;
      count++;
    }
    std::cout << variant_name(v) << ": mean_auc="
              << format_double(auc / static_cast<double>(count))
              << " mean_hter=" << format_double(hter / static_cast<double>(count))
              << " runs=" << count << "\n";
  }
  std::cout << "rows: " << rows.size() << " -> " << cfg.out_dir
            << "/ablation.csv\n";
  return kExitOk;
}

inline int cmd_gradcheck(const Config& cfg) {
  const std::vector<SuiteCheck> checks = run_gradient_suite(cfg.seed);
  bool all_pass = true;
  for (const SuiteCheck& c : checks) {
    const bool pass = c.passes(1e-4);
    all_pass = all_pass && pass;
    std::cout << c.name << ": max_rel_err=" << format_double(c.report.max_rel_err)
              << " max_abs_err=" << format_double(c.report.max_abs_err)
              << " params=" << c.report.num_params_checked
              << " instances=" << c.instances << (pass ? " PASS" : " FAIL")
              << "\n";
  }
  return all_pass ? kExitOk : kExitNumeric;
}

inline int cmd_stats(const Config& cfg) {
  if (cfg.checkpoint.empty()) {
    throw ConfigError("stats requires --checkpoint");
  }
  const ModelParams params = load_checkpoint(cfg.checkpoint);
  std::vector<DomainDataset> domains;
  for (std::size_t s = 1; s <= cfg.domains; ++s) {
    domains.push_back(read_descriptors(domain_file(cfg, s)));
  }
  const AssignmentReport report =
      assignment_stats(params, domains, cfg.stats_samples, cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);
  write_assignment_csv(cfg.out_dir + "/assignment_stats.csv",
                       render_config_line(cfg), report);
  write_residuals_csv(cfg.out_dir + "/residuals.csv", render_config_line(cfg),
                      report);
  std::cout << "config: " << render_config_line(cfg) << "\n";
  std::cout << "assignment census over " << report.samples_used << " samples, "
            << report.residuals.size() << " locals -> " << cfg.out_dir << "\n";
  return kExitOk;
}

}  // namespace cli_detail

inline int cli_main(int argc, const char* const* argv) {
  using namespace cli_detail;
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "--help" || args[0] == "help") {
    std::cout << kUsage;
    return args.empty() ? kExitUsage : kExitOk;
  }
  const std::string cmd = args[0];
  args.erase(args.begin());
  try {
    const Config cfg = resolve_config(args);
    if (cmd == "gen-data") return cmd_gen_data(cfg);
    if (cmd == "train") return cmd_train(cfg);
    if (cmd == "eval") return cmd_eval(cfg);
    if (cmd == "ablate") return cmd_ablate(cfg);
    if (cmd == "gradcheck") return cmd_gradcheck(cfg);
    if (cmd == "stats") return cmd_stats(cfg);
    std::cerr << "unknown subcommand '" << cmd << "'\n" << kUsage;
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace vladvsa
