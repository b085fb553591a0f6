// Command-line entry point: synth, forecast, augment, pretrain, finetune,
// train-baseline, evaluate and ablate.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lews {

/// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lews
