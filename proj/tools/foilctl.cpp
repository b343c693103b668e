// foilctl: generate synthetic sessions, train the shape estimator, evaluate
// it and run the closed-loop suites.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "foilskin/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

int exit_code(foilskin::ErrorCategory c) {
  switch (c) {
    case foilskin::ErrorCategory::config: return 2;
    case foilskin::ErrorCategory::usage: return 2;
    case foilskin::ErrorCategory::data: return 3;
    case foilskin::ErrorCategory::numerical: return 4;
  }
  return 4;
}

const char* category_name(foilskin::ErrorCategory c) {
  switch (c) {
    case foilskin::ErrorCategory::config: return "config";
    case foilskin::ErrorCategory::usage: return "usage";
    case foilskin::ErrorCategory::data: return "data";
    case foilskin::ErrorCategory::numerical: return "numerical";
  }
  return "unknown";
}

foilskin::RunConfig resolve(const Options& o) {
  foilskin::RunConfig cfg = o.config.empty() ? foilskin::RunConfig{} : foilskin::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  cfg.validate();
  return cfg;
}

void print_stats(const char* label, const foilskin::ErrorStats& s) {
  std::printf("  %-10s n=%-6zu mean %.3f%%  std %.3f%%  max %.3f%%\n", label, s.count, s.mean, s.std, s.max);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic e-skin camber sensing and control experiments"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "INI config file (defaults apply when omitted)");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "root seed, overrides run.seed");
    sub->add_option("--epochs", opt.epochs, "training epochs, overrides train.epochs");
  };
  auto* generate = app.add_subcommand("generate", "simulate a training session and write the logs");
  auto* train = app.add_subcommand("train", "fit the shape estimator on the logs");
  auto* evaluate = app.add_subcommand("evaluate", "held-out sensor error of the trained model");
  auto* control = app.add_subcommand("control", "closed-loop step and tracking suites");
  auto* report = app.add_subcommand("report", "collect all outputs into report.md and report.json");
  for (auto* sub : {generate, train, evaluate, control, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const foilskin::RunConfig cfg = resolve(opt);
    const std::filesystem::path out(opt.out);
    if (generate->parsed()) {
      const auto r = foilskin::cmd_generate(cfg, out);
      std::printf("generated %zu capacitance frames and %zu marker sets\n", r.frames, r.marker_sets);
    } else if (train->parsed()) {
      const auto r = foilskin::cmd_train(cfg, out);
      std::printf("trained %zu epochs; validation loss %.3e -> %.3e (best epoch %zu)\n",
                  r.report.validation_loss.size(), r.report.initial_validation_loss,
                  r.report.best_validation_loss, r.report.best_epoch);
    } else if (evaluate->parsed()) {
      const auto r = foilskin::cmd_evaluate(cfg, out);
      std::printf("tip error, percent of foil length:\n");
      print_stats("all", r.overall);
      for (const auto& b : r.buckets) {
        char label[32];
        std::snprintf(label, sizeof label, "%g-%g%%", b.bucket.lo, b.bucket.hi);
        if (b.stats) print_stats(label, *b.stats);
        else std::printf("  %-10s (no samples)\n", label);
      }
    } else if (control->parsed()) {
      const auto r = foilskin::cmd_control(cfg, out);
      std::printf("step: mean rise time %.3f s\n", foilskin::mean_of(r.step.rise_times));
      for (const auto& g : r.grid) std::printf("  %-20s NRMSE %.4f\n", g.name.c_str(), g.nrmse_truth);
    } else if (report->parsed()) {
      std::cout << foilskin::cmd_report(cfg, out);
    }
  } catch (const foilskin::Error& e) {
    std::fprintf(stderr, "foilctl: %s (%s error)\n", e.what(), category_name(e.category()));
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "foilctl: numerical error: %s\n", e.what());
    return 4;
  }
  return 0;
}
