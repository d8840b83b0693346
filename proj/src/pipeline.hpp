// The six toolkit commands, each a pure function of the configuration:
// generate traces, collect offline experience, train the selector,
// evaluate policy suites, run the interval ablation, summarize a
// dataset. Outputs are written atomically (temp file, then rename) so a
// failed run never leaves partial artifacts.
#pragma once

#include <string>

#include "config.hpp"
#include "dataset.hpp"
#include "meta.hpp"
#include "rl.hpp"
#include "sim.hpp"

namespace ivy {

SimParams sim_params_from(const Config& cfg);
BweParams bwe_params_from(const Config& cfg);
QoeParams qoe_params_from(const Config& cfg);
IqlConfig iql_config_from(const Config& cfg);
UtilityParams utility_params_from(const Config& cfg);

// Collection core, reused by collect and the ablation: `calls` calls of
// the uniform-random selector over the collection regimes.
Dataset collect_dataset(const Config& cfg, int calls, const SimParams& sim);

void cmd_gen_traces(const Config& cfg);
void cmd_collect(const Config& cfg);
void cmd_train(const Config& cfg);
void cmd_eval(const Config& cfg);
void cmd_ablate(const Config& cfg);
// Returns the summary text it prints, for callers that capture it.
std::string cmd_stats(const Config& cfg);

// Writes content to `path` via a temp file in the same directory,
// creating parent directories as needed.
void atomic_write_text(const std::string& path, const std::string& content);

void run_command(const std::string& command, const Config& cfg);

}  // namespace ivy
