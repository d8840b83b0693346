// Command-line front end. Everything goes through the public C API so
// this binary doubles as a living example of driving libivy from C.
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ivy/ivy.h"

namespace {

std::string key_listing() {
  std::string out = "Configuration keys (defaults in parentheses):\n";
  for (size_t i = 0; i < ivy_config_key_count(); ++i) {
    const char *name = nullptr, *def = nullptr, *help = nullptr;
    if (ivy_config_key_info(i, &name, &def, &help) != 0) continue;
    out += "  ";
    out += name;
    out += " (";
    out += def;
    out += "): ";
    out += help;
    out += "\n";
  }
  out +=
      "\nKeys come from --config files (INI-style sections) and --set "
      "overrides, applied in that order.";
  return out;
}

int fail_with(int code) {
  std::fprintf(stderr, "error: %s\n", ivy_last_error());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ivy: trace-driven estimator-selection toolkit"};
  app.footer(key_listing());
  app.require_subcommand(1);
  app.fallthrough();  // lets --config/--set appear after the subcommand

  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_files,
                 "configuration file(s), applied in order")
      ->expected(-1);
  app.add_option("-s,--set", overrides,
                 "override one key, e.g. --set run.seed=7")
      ->expected(-1);

  const char* const commands[] = {"gen-traces", "collect", "train",
                                  "eval",       "ablate",  "stats"};
  const char* const descriptions[] = {
      "write per-regime trace files",
      "run random-selection calls and write the experience dataset",
      "train the selector on the dataset and write a checkpoint",
      "evaluate the policy suite and write reports",
      "run the decision-interval ablation",
      "summarize the dataset (includes the delta rule sigma)"};
  for (size_t i = 0; i < 6; ++i)
    app.add_subcommand(commands[i], descriptions[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad flags are a config error
  }

  std::unique_ptr<ivy_config, void (*)(ivy_config*)> cfg(ivy_config_new(),
                                                         ivy_config_free);
  for (const std::string& path : config_files) {
    int rc = ivy_config_load(cfg.get(), path.c_str());
    if (rc != 0) return fail_with(rc);
  }
  for (const std::string& assignment : overrides) {
    int rc = ivy_config_set(cfg.get(), assignment.c_str());
    if (rc != 0) return fail_with(rc);
  }

  for (const CLI::App* sub : app.get_subcommands()) {
    int rc = ivy_run(cfg.get(), sub->get_name().c_str());
    if (rc != 0) return fail_with(rc);
  }
  return 0;
}
