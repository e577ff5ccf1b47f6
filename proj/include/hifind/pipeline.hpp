#pragma once

#include <string>

#include "hifind/config.hpp"

namespace hifind::pipeline {

// Dispatches one subcommand (synth | train | infer | baseline | eval |
// render) driven by a key=value config. Throws hifind::Error on failure.
void run_command(const std::string& command, const Config& config);

void cmd_synth(const Config& config);
void cmd_train(const Config& config);
void cmd_infer(const Config& config);
void cmd_baseline(const Config& config);
void cmd_eval(const Config& config);
void cmd_render(const Config& config);

}  // namespace hifind::pipeline
