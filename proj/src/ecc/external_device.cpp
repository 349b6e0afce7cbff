#include "ecc/external_device.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <vector>

#include "ecc/energy_io.hpp"

namespace ecc {

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char ch : s) {
        if (ch == '\'') out += "'\\''";
        else out += ch;
    }
    return out + "'";
}

class TempFile {
public:
    explicit TempFile(const std::string& dir) {
        std::string pattern = dir + "/ecc-exchange-XXXXXX";
        std::vector<char> buf(pattern.begin(), pattern.end());
        buf.push_back('\0');
        const int fd = ::mkstemp(buf.data());
        if (fd < 0) throw OracleError(OracleError::Kind::Failure, "cannot create exchange file in " + dir);
        ::close(fd);
        path_ = buf.data();
    }
    ~TempFile() { ::unlink(path_.c_str()); }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

}  // namespace

bool parse_single_real(const std::string& text, double& out) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return false;
    const auto last = text.find_last_not_of(" \t\r\n");
    const std::string token = text.substr(first, last - first + 1);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(token.c_str(), &end);
    if (errno != 0 || end != token.c_str() + token.size() || !std::isfinite(v)) return false;
    out = v;
    return true;
}

CommandResult run_command(const std::string& command, double timeout_seconds, const CommandEnv& env) {
    int fds[2];
    if (::pipe(fds) != 0) throw OracleError(OracleError::Kind::Failure, "pipe() failed");
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw OracleError(OracleError::Kind::Failure, "fork() failed");
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        for (const auto& [k, v] : env) ::setenv(k.c_str(), v.c_str(), 1);
        ::dup2(fds[1], STDOUT_FILENO);
        ::close(fds[0]);
        ::close(fds[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(fds[1]);

    CommandResult result;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    char buf[4096];
    for (;;) {
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            result.timed_out = true;
            break;
        }
        pollfd pfd{fds[0], POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) {
            result.timed_out = true;
            break;
        }
        const ssize_t got = ::read(fds[0], buf, sizeof buf);
        if (got < 0 && errno == EINTR) continue;
        if (got <= 0) break;
        result.stdout_text.append(buf, static_cast<std::size_t>(got));
    }
    ::close(fds[0]);
    if (result.timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (!result.timed_out) {
        result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    }
    return result;
}

ExternalCommandDevice::ExternalCommandDevice(Architecture arch, ExternalCommandConfig cfg)
    : arch_(std::move(arch)), cfg_(std::move(cfg)) {
    arch_.validate();
    if (cfg_.command.empty()) throw InvalidArgument("external measurement command is empty");
    if (!(cfg_.timeout_seconds > 0.0)) throw InvalidArgument("external command timeout must be positive");
}

double ExternalCommandDevice::measure(const SparsityVector& s, std::uint64_t trial_seed) {
    std::lock_guard<std::mutex> lock(mutex_);
    TempFile exchange(cfg_.work_dir);
    {
        std::ofstream out(exchange.path());
        out << make_exchange(arch_, s, trial_seed).dump(2) << '\n';
        if (!out) throw OracleError(OracleError::Kind::Failure, "cannot write exchange file " + exchange.path());
    }
    std::string cmd = cfg_.command;
    const std::string placeholder = "{input}";
    const std::string quoted = shell_quote(exchange.path());
    for (auto pos = cmd.find(placeholder); pos != std::string::npos; pos = cmd.find(placeholder, pos + quoted.size())) {
        cmd.replace(pos, placeholder.size(), quoted);
    }

    const auto result = run_command(cmd, cfg_.timeout_seconds, {{"ECC_EXCHANGE_FILE", exchange.path()}});
    if (result.timed_out) {
        throw OracleError(OracleError::Kind::Timeout,
                          "measurement command timed out after " + std::to_string(cfg_.timeout_seconds) + " s");
    }
    if (result.exit_code != 0) {
        throw OracleError(OracleError::Kind::NonzeroExit,
                          "measurement command exited with code " + std::to_string(result.exit_code), result.exit_code);
    }
    double joules = 0.0;
    if (!parse_single_real(result.stdout_text, joules)) {
        throw OracleError(OracleError::Kind::Unparseable,
                          "measurement command output is not a single real: '" + result.stdout_text + "'");
    }
    return joules;
}

}  // namespace ecc
