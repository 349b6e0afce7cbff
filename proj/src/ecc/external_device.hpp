#pragma once

#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "ecc/energy.hpp"
#include "ecc/network.hpp"

namespace ecc {

struct ExternalCommandConfig {
    /// Shell command. Every "{input}" is replaced by the quoted path of the exchange file; the
    /// path is also exported as ECC_EXCHANGE_FILE.
    std::string command;
    double timeout_seconds = 60.0;
    std::string work_dir = "/tmp";
};

/// Runs a user measurement command per trial. Its stdout must be a single real (joules).
/// Calls are serialized: at most one measurement is in flight.
class ExternalCommandDevice : public EnergyOracle {
public:
    ExternalCommandDevice(Architecture arch, ExternalCommandConfig cfg);

    double measure(const SparsityVector& s, std::uint64_t trial_seed) override;

private:
    Architecture arch_;
    ExternalCommandConfig cfg_;
    std::mutex mutex_;
};

/// Result of running a shell command with a deadline.
struct CommandResult {
    int exit_code = 0;
    bool timed_out = false;
    std::string stdout_text;
};

using CommandEnv = std::vector<std::pair<std::string, std::string>>;

/// Runs `sh -c command` with extra environment variables; the whole process group is killed on timeout.
CommandResult run_command(const std::string& command, double timeout_seconds, const CommandEnv& env = {});

/// Parses exactly one finite real surrounded by optional whitespace.
bool parse_single_real(const std::string& text, double& out);

}  // namespace ecc
