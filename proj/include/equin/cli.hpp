#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <ostream>
#include <string>

#include "equin/dataset.hpp"
#include "equin/evaluation.hpp"
#include "equin/run_config.hpp"
#include "equin/training.hpp"

namespace equin::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 2, kIo = 3, kNumerical = 4 };

/// Exit code for an exception escaping a command: validation 2, I/O 3,
/// numerical 4; anything else is reported as a validation failure.
int exit_code(const std::exception& e);

/// Entry point of the `equin` executable (subcommands generate, train,
/// eval, sweep). Never throws; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Trains on the train split and writes a run directory: config.json,
/// metrics.csv (epoch,L_G,entropy,L_O,total), checkpoints/ every
/// `config.checkpoint_every` epochs and final.eqck.
TrainResult train_to_directory(const Dataset& data, const RunConfig& config, const std::filesystem::path& dir,
                               std::ostream& log);

/// All four metrics of `rep` on the test split. Disentanglement is NaN when
/// the group has an SO(3) factor.
MetricsRow evaluate_metrics(const Representation& rep, const Dataset& data, const RunConfig& config, int heads);

}  // namespace equin::cli
