#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "icepred/icepred.h"

namespace {

void print_line(const char* line, void*) { std::cout << line << std::endl; }

int fail(const char* what) {
  std::cerr << "icepred: " << what << ": " << icepred_last_error() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flowline ice-sheet inversion, low-rank posterior and flux prediction"};
  app.set_version_flag("--version", std::string(icepred_version()));

  std::string stage;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  bool print_config = false;

  const std::vector<std::string> stages{"forward", "synth",  "invert",  "lcurve",
                                        "spectrum", "sample", "predict", "all"};
  app.add_option("stage", stage, "Pipeline stage")->check(CLI::IsMember(stages));
  app.add_option("--config", config_path, "JSON run configuration (defaults if omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the configured random seed");
  app.add_option("--threads", threads, "Worker threads for L-curve points and GEVD actions")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Override the output directory");
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");
  CLI11_PARSE(app, argc, argv);
  if (stage.empty() && !print_config) {
    std::cerr << app.help();
    return 2;
  }

  icepred_config* cfg = nullptr;
  if (icepred_config_load(config_path.empty() ? nullptr : config_path.c_str(), &cfg) != ICEPRED_OK)
    return fail("configuration");
  struct Guard {
    icepred_config* c;
    icepred_pipeline* p = nullptr;
    ~Guard() {
      icepred_pipeline_free(p);
      icepred_config_free(c);
    }
  } guard{cfg};

  if (seed && icepred_config_set_seed(cfg, *seed) != ICEPRED_OK) return fail("--seed");
  if (threads && icepred_config_set_threads(cfg, *threads) != ICEPRED_OK) return fail("--threads");
  if (out_dir && icepred_config_set_output_dir(cfg, out_dir->c_str()) != ICEPRED_OK) return fail("--out");

  if (print_config) {
    size_t needed = 0;
    icepred_config_serialize(cfg, nullptr, 0, &needed);
    std::string text(needed, '\0');
    if (icepred_config_serialize(cfg, text.data(), text.size(), &needed) != ICEPRED_OK) return fail("serialize");
    text.resize(needed - 1);
    std::cout << text;
    return 0;
  }

  if (icepred_pipeline_create(cfg, print_line, nullptr, &guard.p) != ICEPRED_OK) return fail("configuration");
  if (icepred_pipeline_run(guard.p, stage.c_str()) != ICEPRED_OK) return fail(stage.c_str());
  return 0;
}
