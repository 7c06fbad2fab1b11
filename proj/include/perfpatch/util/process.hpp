#pragma once

// Child process execution with captured output and a wall-clock timeout.
// POSIX only.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "perfpatch/error.hpp"

namespace perfpatch::util {

struct ProcessResult {
    int exit_status = -1;  // exit code, or 128 + signal
    std::string output;    // stdout and stderr, interleaved
    std::chrono::milliseconds duration{0};
    bool timed_out = false;
};

struct ProcessOptions {
    std::optional<std::filesystem::path> working_dir;
    std::optional<std::chrono::milliseconds> timeout;
    bool merge_stderr = true;  // false discards stderr
    std::string stdin_data;
};

namespace detail {

inline void close_quiet(int fd) {
    if (fd >= 0) ::close(fd);
}

}  // namespace detail

/// Run `argv` directly (no shell). Exit status 127 means the program could
/// not be executed.
inline ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& opts = {}) {
    if (argv.empty()) throw CommandNotFound("empty command");

    int out_pipe[2];
    int in_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw IoError(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
        detail::close_quiet(out_pipe[0]);
        detail::close_quiet(out_pipe[1]);
        throw IoError(std::string("pipe: ") + std::strerror(errno));
    }

    // everything the child needs is prepared before fork: only
    // async-signal-safe calls are allowed in a child of a threaded parent
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    std::string workdir_str = opts.working_dir ? opts.working_dir->string() : std::string();
    const char* workdir = opts.working_dir ? workdir_str.c_str() : nullptr;

    const auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) throw IoError(std::string("fork: ") + std::strerror(errno));

    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        if (opts.merge_stderr) ::dup2(out_pipe[1], STDERR_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        if (!opts.merge_stderr) {
            int devnull = ::open("/dev/null", O_WRONLY);
            if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
        }
        if (workdir && ::chdir(workdir) != 0) ::_exit(126);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }

    ::setpgid(pid, pid);
    ::close(out_pipe[1]);
    ::close(in_pipe[0]);
    if (!opts.stdin_data.empty()) {
        std::size_t written = 0;
        while (written < opts.stdin_data.size()) {
            ssize_t n = ::write(in_pipe[1], opts.stdin_data.data() + written, opts.stdin_data.size() - written);
            if (n <= 0) break;
            written += static_cast<std::size_t>(n);
        }
    }
    ::close(in_pipe[1]);

    ProcessResult result;
    char buf[8192];
    bool open = true;
    while (open) {
        int wait_ms = -1;
        if (opts.timeout) {
            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            auto left = *opts.timeout - elapsed;
            if (left.count() <= 0) {
                result.timed_out = true;
                break;
            }
            wait_ms = static_cast<int>(left.count());
        }
        pollfd pfd{out_pipe[0], POLLIN, 0};
        int rc = ::poll(&pfd, 1, wait_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0) continue;  // re-checks the deadline
        ssize_t n = ::read(out_pipe[0], buf, sizeof(buf));
        if (n > 0) result.output.append(buf, static_cast<std::size_t>(n));
        else if (n == 0 || errno != EINTR) open = false;
    }

    if (result.timed_out) ::kill(-pid, SIGKILL);
    ::close(out_pipe[0]);

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (result.timed_out) {
        // the group may still hold stragglers
        ::kill(-pid, SIGKILL);
    }
    if (WIFEXITED(status)) result.exit_status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_status = 128 + WTERMSIG(status);
    result.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return result;
}

/// Run a command line through /bin/sh -c.
inline ProcessResult run_shell(const std::string& command, const ProcessOptions& opts = {}) {
    return run_process({"/bin/sh", "-c", command}, opts);
}

}  // namespace perfpatch::util
