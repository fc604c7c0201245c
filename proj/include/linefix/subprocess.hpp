#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace linefix::proc {

class SandboxSetupFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;  // stdout and stderr interleaved
};

// Runs `cmd` through /bin/sh -c in `cwd` with `extra_env` on top of the
// inherited environment. On timeout the whole process group is killed.
RunResult run_command(const std::string& cmd, const std::filesystem::path& cwd,
                      const std::map<std::string, std::string>& extra_env = {},
                      int timeout_s = 120);

}  // namespace linefix::proc
