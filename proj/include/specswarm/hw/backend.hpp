#pragma once

/**
 * @file backend.hpp
 * @brief Hardware measurement backend: assembles emitted kernels into shared
 *        objects, runs them in a forked child under per-class performance
 *        counters, and contains crashes and hangs behind a watchdog.
 */

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <dlfcn.h>
#include <fcntl.h>
#include <linux/perf_event.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "specswarm/fitness.hpp"
#include "specswarm/hw/counters.hpp"
#include "specswarm/hw/kernel.hpp"
#include "specswarm/hw/platform.hpp"

namespace specswarm {

struct hw_options {
    microarch arch = microarch::unsupported;
    counter_map counters{};
    std::optional<std::uint32_t> core_pin;
    std::uint32_t timeout_ms = 2000;
    std::filesystem::path work_dir;  ///< empty: a fresh directory under the system temp path
};

namespace detail {

struct child_payload {
    std::uint32_t magic = 0;
    std::uint64_t counts[k_class_count] = {};
};

inline constexpr std::uint32_t k_payload_magic = 0x53575250;

inline int open_raw_counter(std::uint64_t config) {
    perf_event_attr attr{};
    attr.type = PERF_TYPE_RAW;
    attr.size = sizeof(attr);
    attr.config = config;
    attr.disabled = 1;
    attr.exclude_kernel = 1;
    attr.exclude_hv = 1;
    return static_cast<int>(syscall(SYS_perf_event_open, &attr, 0, -1, -1, 0));
}

} // namespace detail

/// Runs sequences on the host CPU. Each measurement assembles a kernel,
/// links it into a shared object, loads it in the parent, then forks: the
/// child pins itself, opens one raw counter per supported class, executes
/// the kernel once (the kernel itself holds the repetitions) and reports the
/// counts over a pipe. A crash or a watchdog timeout in the child yields an
/// invalid observation; the parent never executes generated code itself.
class hw_backend final : public fitness_backend {
  public:
    hw_backend(const catalog& cat, hw_options opt) : cat_{&cat}, opt_{std::move(opt)} {
        if (opt_.work_dir.empty()) {
            opt_.work_dir = std::filesystem::temp_directory_path() /
                            ("specswarm-" + std::to_string(::getpid()));
        }
        std::filesystem::create_directories(opt_.work_dir);
        if (!toolchain_available()) {
            throw std::runtime_error("hw backend: assembler or C compiler not available");
        }
    }

    /// True when `as` and `cc` both run.
    static bool toolchain_available() {
        return std::system("as --version > /dev/null 2>&1") == 0 &&
               std::system("cc --version > /dev/null 2>&1") == 0;
    }

    backend_capabilities capabilities() const override {
        backend_capabilities caps;
        caps.simulated = false;
        caps.reentrant = false;
        for (auto c : all_classes()) {
            caps.supported[index_of(c)] = opt_.counters.for_class(c).supported;
        }
        return caps;
    }

    raw_observation measure(const std::vector<instruction_instance>& seq, std::uint32_t reps,
                            const data_environment& env, std::uint64_t stream) override {
        (void)stream;  // hardware counts are not replayable; streams only key noise models
        raw_observation obs;
        obs.valid = false;

        const auto art = emit_kernel(*cat_, seq, reps, env);
        const auto tag = std::to_string(run_counter_++);
        const auto asm_path = opt_.work_dir / ("kernel_" + tag + ".s");
        const auto obj_path = opt_.work_dir / ("kernel_" + tag + ".o");
        const auto so_path = opt_.work_dir / ("kernel_" + tag + ".so");
        {
            std::ofstream out(asm_path);
            if (!out) throw std::runtime_error("hw backend: cannot write " + asm_path.string());
            out << art.assembly;
        }
        const auto cleanup = [&] {
            std::error_code ec;
            std::filesystem::remove(asm_path, ec);
            std::filesystem::remove(obj_path, ec);
            std::filesystem::remove(so_path, ec);
        };

        const std::string assemble = "as -o '" + obj_path.string() + "' '" + asm_path.string() +
                                     "' 2> /dev/null";
        if (std::system(assemble.c_str()) != 0) {
            cleanup();
            return obs;  // unassemblable code: invalid, not fatal
        }
        const std::string link = "cc -shared -o '" + so_path.string() + "' '" +
                                 obj_path.string() + "' 2> /dev/null";
        if (std::system(link.c_str()) != 0) {
            cleanup();
            return obs;
        }

        void* handle = ::dlopen(so_path.string().c_str(), RTLD_NOW | RTLD_LOCAL);
        if (!handle) {
            cleanup();
            return obs;
        }
        using kernel_fn = void (*)(void*);
        auto* fn = reinterpret_cast<kernel_fn>(::dlsym(handle, art.entry_symbol.c_str()));
        if (!fn) {
            ::dlclose(handle);
            cleanup();
            return obs;
        }

        obs = run_isolated(fn, art.scratch_bytes);
        ::dlclose(handle);
        cleanup();
        return obs;
    }

    const hw_options& options() const { return opt_; }

  private:
    raw_observation run_isolated(void (*fn)(void*), std::uint32_t scratch_bytes) {
        raw_observation obs;
        obs.valid = false;

        int fds[2];
        if (::pipe(fds) != 0) return obs;

        const pid_t pid = ::fork();
        if (pid < 0) {
            ::close(fds[0]);
            ::close(fds[1]);
            return obs;
        }
        if (pid == 0) {
            ::close(fds[0]);
            child_run(fn, scratch_bytes, fds[1]);
            ::_exit(0);
        }

        ::close(fds[1]);
        detail::child_payload payload;
        bool timed_out = false;
        std::size_t got = 0;
        auto* bytes = reinterpret_cast<char*>(&payload);
        while (got < sizeof(payload)) {
            pollfd pfd{fds[0], POLLIN, 0};
            const int pr = ::poll(&pfd, 1, static_cast<int>(opt_.timeout_ms));
            if (pr == 0) {
                timed_out = true;
                break;
            }
            if (pr < 0) {
                if (errno == EINTR) continue;
                break;
            }
            const ssize_t n = ::read(fds[0], bytes + got, sizeof(payload) - got);
            if (n <= 0) break;  // EOF: child died before writing everything
            got += static_cast<std::size_t>(n);
        }
        ::close(fds[0]);
        if (timed_out) ::kill(pid, SIGKILL);

        int status = 0;
        ::waitpid(pid, &status, 0);

        if (timed_out || got != sizeof(payload) || payload.magic != detail::k_payload_magic) {
            return obs;
        }
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return obs;
        for (std::size_t c = 0; c < k_class_count; ++c) obs.counts[c] = payload.counts[c];
        obs.valid = true;
        return obs;
    }

    void child_run(void (*fn)(void*), std::uint32_t scratch_bytes, int write_fd) {
        // A faulting kernel must terminate this child with its raw signal;
        // handlers inherited from the parent (test harnesses, crash
        // reporters) would otherwise run here and corrupt the parent's
        // output or exit path.
        for (int sig : {SIGILL, SIGSEGV, SIGBUS, SIGFPE, SIGTRAP, SIGABRT}) {
            ::signal(sig, SIG_DFL);
        }
        std::optional<std::uint32_t> core = opt_.core_pin;
        if (const char* env_core = std::getenv("SPECSWARM_CORE")) {
            char* end = nullptr;
            const unsigned long v = std::strtoul(env_core, &end, 10);
            if (end && *end == '\0') core = static_cast<std::uint32_t>(v);
        }
        if (core) {
            cpu_set_t set;
            CPU_ZERO(&set);
            CPU_SET(*core, &set);
            ::sched_setaffinity(0, sizeof(set), &set);
        }

        int counter_fds[k_class_count];
        for (std::size_t c = 0; c < k_class_count; ++c) {
            counter_fds[c] = -1;
            const auto& spec = opt_.counters.entries[c];
            if (!spec.supported) continue;
            counter_fds[c] = detail::open_raw_counter(spec.raw_config());
        }

        alignas(64) static unsigned char scratch[4096];
        if (scratch_bytes > sizeof(scratch)) ::_exit(3);

        for (auto fd : counter_fds) {
            if (fd < 0) continue;
            ::ioctl(fd, PERF_EVENT_IOC_RESET, 0);
            ::ioctl(fd, PERF_EVENT_IOC_ENABLE, 0);
        }
        fn(scratch);
        detail::child_payload payload;
        payload.magic = detail::k_payload_magic;
        for (std::size_t c = 0; c < k_class_count; ++c) {
            if (counter_fds[c] < 0) continue;
            ::ioctl(counter_fds[c], PERF_EVENT_IOC_DISABLE, 0);
            std::uint64_t value = 0;
            if (::read(counter_fds[c], &value, sizeof(value)) == sizeof(value)) {
                payload.counts[c] = value;
            }
        }
        std::size_t written = 0;
        const auto* bytes = reinterpret_cast<const char*>(&payload);
        while (written < sizeof(payload)) {
            const ssize_t n = ::write(write_fd, bytes + written, sizeof(payload) - written);
            if (n <= 0) ::_exit(2);
            written += static_cast<std::size_t>(n);
        }
        ::close(write_fd);
    }

    const catalog* cat_;
    hw_options opt_;
    std::uint64_t run_counter_ = 0;
};

} // namespace specswarm
