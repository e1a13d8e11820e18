#ifndef NOSM_COMMANDS_HPP
#define NOSM_COMMANDS_HPP

// One function per subcommand. Each writes a plain-text report and a
// tab-separated file into the output directory and returns the report.

#include <string>

#include "nosm/run_config.hpp"

namespace nosm::app {

struct CommandResult {
  std::string report;
  /// False when the command ran but its check did not pass (gradcheck).
  bool ok = true;
};

CommandResult cmd_vocab(const RunConfig& config);
CommandResult cmd_segment(const RunConfig& config);
CommandResult cmd_ops(const RunConfig& config);
CommandResult cmd_train(const RunConfig& config);
CommandResult cmd_ppl(const RunConfig& config);
CommandResult cmd_score(const RunConfig& config);
CommandResult cmd_neighbors(const RunConfig& config);
CommandResult cmd_synonyms(const RunConfig& config);
CommandResult cmd_morphsim(const RunConfig& config);
CommandResult cmd_gradcheck(const RunConfig& config);

/// Dispatch by subcommand name; throws ErrorKind::argument for unknown names.
CommandResult run_command(const std::string& name, const RunConfig& config);

}  // namespace nosm::app

#endif  // NOSM_COMMANDS_HPP
