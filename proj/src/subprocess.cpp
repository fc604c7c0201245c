#include "linefix/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>

namespace linefix::proc {

namespace {
constexpr std::size_t kMaxCapturedOutput = 4u << 20;  // 4 MiB
}

RunResult run_command(const std::string& cmd, const std::filesystem::path& cwd,
                      const std::map<std::string, std::string>& extra_env, int timeout_s) {
    int pipefd[2];
    if (::pipe(pipefd) != 0) {
        throw SandboxSetupFailure(std::string("pipe: ") + std::strerror(errno));
    }

    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        throw SandboxSetupFailure(std::string("fork: ") + std::strerror(errno));
    }

    if (pid == 0) {
        // Child: own process group so a timeout can kill the whole tree.
        ::setpgid(0, 0);
        ::close(pipefd[0]);
        ::dup2(pipefd[1], STDOUT_FILENO);
        ::dup2(pipefd[1], STDERR_FILENO);
        ::close(pipefd[1]);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
            ::_exit(127);
        }
        for (const auto& [k, v] : extra_env) {
            ::setenv(k.c_str(), v.c_str(), 1);
        }
        ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }

    ::close(pipefd[1]);
    RunResult result;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::seconds(timeout_s);

    char buf[4096];
    bool open = true;
    int polls_after_kill = 0;
    while (open) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                             deadline - std::chrono::steady_clock::now())
                             .count();
        if (remaining <= 0 && !result.timed_out) {
            result.timed_out = true;
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
        }
        if (result.timed_out && ++polls_after_kill > 50) break;
        struct pollfd pfd {pipefd[0], POLLIN, 0};
        int timeout_ms = result.timed_out
                             ? 100
                             : static_cast<int>(std::min<long long>(std::max<long long>(remaining, 1), 500));
        int rv = ::poll(&pfd, 1, timeout_ms);
        if (rv > 0) {
            ssize_t n = ::read(pipefd[0], buf, sizeof(buf));
            if (n > 0) {
                if (result.output.size() < kMaxCapturedOutput) {
                    result.output.append(buf, static_cast<std::size_t>(
                                                  std::min<ssize_t>(n, static_cast<ssize_t>(
                                                                           kMaxCapturedOutput -
                                                                           result.output.size()))));
                }
            } else {
                open = false;  // EOF or error: child side closed
            }
        } else if (rv == 0 && result.timed_out) {
            open = false;  // killed; stop draining
        }
    }
    ::close(pipefd[0]);

    int status = 0;
    ::waitpid(pid, &status, 0);
    if (result.timed_out) {
        result.exit_code = -1;
    } else if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    }
    return result;
}

}  // namespace linefix::proc
