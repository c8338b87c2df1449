#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pidlf/experiment.hpp"
#include "pidlf/trainers.hpp"

namespace pidlf {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitDiverged = 2,
    kExitIo = 3,
};

/// A fully resolved run: the flat settings object echoed into the manifest and
/// the structures built from it.
struct RunSettings {
    nlohmann::json resolved;
    TrainConfig train;
    DatasetSpec dataset;
};

/// Built-in defaults for every settings key. Optional keys are null.
nlohmann::json default_settings();

/// Layers built-in defaults < preset < `file` < `flags` and builds the run.
/// The preset is looked up from `flags`, then `file`. Unknown keys or values of
/// the wrong type throw UsageError.
RunSettings resolve_settings(const nlohmann::json& flags, const nlohmann::json& file);

/// Entry point behind the `pidlf` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pidlf
