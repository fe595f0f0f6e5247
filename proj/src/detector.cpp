#include "objtrans/detector.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "objtrans/errors.hpp"
#include "objtrans/png_io.hpp"

namespace objtrans {

namespace fs = std::filesystem;

DetectResponse detect(DetectorAdapter& adapter, const DetectRequest& req) {
    auto resp = adapter.handle(req);
    if (resp.request_id != req.request_id) {
        throw AdapterError("response for request " + std::to_string(resp.request_id) + " answered request " +
                           std::to_string(req.request_id));
    }
    for (auto& d : resp.detections) {
        if (!(d.score >= req.conf_threshold && d.score <= 1.0)) {
            throw AdapterError("detection score " + std::to_string(d.score) + " outside [conf_threshold, 1]");
        }
        d.bbox = d.bbox.clipped();
        d.source_run = -1;
    }
    std::stable_sort(resp.detections.begin(), resp.detections.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return resp;
}

namespace {

constexpr std::size_t kStderrTail = 4096;

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void close_fd(int& fd) {
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

}  // namespace

ProcessAdapter::ProcessAdapter(ProcessAdapterOptions options) : options_(std::move(options)) {
    ignore_sigpipe_once();
    if (options_.command.empty()) {
        throw AdapterError("empty adapter command");
    }
    if (!options_.inline_images) {
        if (options_.scratch_dir.empty()) {
            std::string templ = (fs::temp_directory_path() / "objtrans-XXXXXX").string();
            if (::mkdtemp(templ.data()) == nullptr) {
                throw AdapterError(std::string("cannot create scratch dir: ") + std::strerror(errno));
            }
            scratch_ = templ;
            owns_scratch_ = true;
        } else {
            scratch_ = options_.scratch_dir;
            fs::create_directories(scratch_);
        }
    }

    int in[2], out[2], err[2];
    if (::pipe2(in, O_CLOEXEC) != 0 || ::pipe2(out, O_CLOEXEC) != 0 || ::pipe2(err, O_CLOEXEC) != 0) {
        throw AdapterError(std::string("pipe failed: ") + std::strerror(errno));
    }
    pid_t pid = ::fork();
    if (pid < 0) {
        throw AdapterError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        // own process group, so shutdown also reaches grandchildren of the shell
        ::setpgid(0, 0);
        ::dup2(in[0], STDIN_FILENO);
        ::dup2(out[1], STDOUT_FILENO);
        ::dup2(err[1], STDERR_FILENO);
        ::signal(SIGPIPE, SIG_DFL);
        ::execl("/bin/sh", "sh", "-c", options_.command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    pid_ = pid;
    ::setpgid(pid, pid);
    ::close(in[0]);
    ::close(out[1]);
    ::close(err[1]);
    stdin_fd_ = in[1];
    stdout_fd_ = out[0];
    stderr_fd_ = err[0];
    ::fcntl(stderr_fd_, F_SETFL, ::fcntl(stderr_fd_, F_GETFL) | O_NONBLOCK);

    try {
        protocol::check_handshake(read_line());
    } catch (...) {
        shutdown();
        throw;
    }
}

ProcessAdapter::~ProcessAdapter() { shutdown(); }

void ProcessAdapter::shutdown() {
    close_fd(stdin_fd_);
    if (pid_ > 0) {
        int status = 0;
        bool reaped = false;
        for (int i = 0; i < 100 && !reaped; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                reaped = true;
            } else {
                ::usleep(10000);
            }
        }
        if (!reaped) {
            ::kill(-pid_, SIGKILL);
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
        }
        pid_ = -1;
    }
    close_fd(stdout_fd_);
    close_fd(stderr_fd_);
    if (owns_scratch_) {
        std::error_code ec;
        fs::remove_all(scratch_, ec);
        owns_scratch_ = false;
    }
}

void ProcessAdapter::drain_stderr() {
    if (stderr_fd_ < 0) {
        return;
    }
    char buf[4096];
    for (;;) {
        auto n = ::read(stderr_fd_, buf, sizeof buf);
        if (n > 0) {
            stderr_tail_.append(buf, static_cast<std::size_t>(n));
            if (stderr_tail_.size() > kStderrTail) {
                stderr_tail_.erase(0, stderr_tail_.size() - kStderrTail);
            }
            continue;
        }
        if (n == 0) {
            close_fd(stderr_fd_);
        }
        return;
    }
}

void ProcessAdapter::fail(const std::string& what) {
    // give an exiting child a moment to flush stderr
    if (stderr_fd_ >= 0) {
        pollfd p{stderr_fd_, POLLIN, 0};
        for (int i = 0; i < 10 && stderr_fd_ >= 0; ++i) {
            if (::poll(&p, 1, 20) > 0) {
                drain_stderr();
            }
        }
    }
    std::string msg = what;
    if (!stderr_tail_.empty()) {
        msg += "\ndetector stderr (tail):\n" + stderr_tail_;
    }
    throw AdapterError(msg);
}

std::string ProcessAdapter::read_line() {
    auto deadline = std::chrono::steady_clock::now() + options_.timeout;
    for (;;) {
        auto nl = stdout_buf_.find('\n');
        if (nl != std::string::npos) {
            std::string line = stdout_buf_.substr(0, nl);
            stdout_buf_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            return line;
        }
        if (stdout_fd_ < 0) {
            int status = 0;
            std::string how = "detector exited";
            bool reaped = false;
            // stdout closes just before the child becomes reapable
            for (int i = 0; i < 50 && pid_ > 0 && !reaped; ++i) {
                reaped = ::waitpid(pid_, &status, WNOHANG) == pid_;
                if (!reaped) {
                    ::usleep(10000);
                }
            }
            if (reaped) {
                pid_ = -1;
                if (WIFEXITED(status)) {
                    how += " with status " + std::to_string(WEXITSTATUS(status));
                } else if (WIFSIGNALED(status)) {
                    how += " on signal " + std::to_string(WTERMSIG(status));
                }
            }
            fail(how);
        }
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            fail("detector timed out after " + std::to_string(options_.timeout.count()) + " ms");
        }
        pollfd fds[2] = {{stdout_fd_, POLLIN, 0}, {stderr_fd_, POLLIN, 0}};
        int nfds = stderr_fd_ >= 0 ? 2 : 1;
        int rc = ::poll(fds, static_cast<nfds_t>(nfds), static_cast<int>(std::min<long long>(remaining.count(), 1000)));
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail(std::string("poll failed: ") + std::strerror(errno));
        }
        if (nfds == 2 && (fds[1].revents & (POLLIN | POLLHUP)) != 0) {
            drain_stderr();
        }
        if ((fds[0].revents & (POLLIN | POLLHUP | POLLERR)) != 0) {
            char buf[65536];
            auto n = ::read(stdout_fd_, buf, sizeof buf);
            if (n > 0) {
                stdout_buf_.append(buf, static_cast<std::size_t>(n));
            } else if (n == 0) {
                close_fd(stdout_fd_);
            } else if (errno != EINTR && errno != EAGAIN) {
                fail(std::string("read failed: ") + std::strerror(errno));
            }
        }
    }
}

void ProcessAdapter::write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        if (stdin_fd_ < 0) {
            fail("detector stdin closed");
        }
        auto n = ::write(stdin_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            fail(std::string("write to detector failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

DetectResponse ProcessAdapter::handle(const DetectRequest& req) {
    DetectRequest wire = req;
    if (const auto* frame = std::get_if<protocol::SharedFrame>(&req.image)) {
        if (!*frame) {
            throw std::invalid_argument("null frame in request");
        }
        if (options_.inline_images) {
            wire.image = protocol::InlinePng{protocol::base64_encode(png::encode_rgb(**frame))};
        } else {
            auto path = scratch_ / ("req_" + std::to_string(req.request_id) + ".png");
            png::write_rgb(path, **frame);
            wire.image = path;
        }
    }
    write_line(protocol::encode_request(wire));
    auto line = read_line();
    ++calls_;
    if (const auto* p = std::get_if<fs::path>(&wire.image); p != nullptr && !std::holds_alternative<fs::path>(req.image)) {
        std::error_code ec;
        fs::remove(*p, ec);
    }
    return protocol::decode_response(line, req);
}

AdapterPool::AdapterPool(std::size_t size, const Factory& factory) {
    if (size == 0) {
        throw ConfigError("adapter pool needs at least one adapter");
    }
    adapters_.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        adapters_.push_back(factory(i));
    }
}

AdapterPool::AdapterPool(std::unique_ptr<DetectorAdapter> single) {
    adapters_.push_back(std::move(single));
}

std::uint64_t AdapterPool::total_calls() const {
    std::uint64_t n = 0;
    for (const auto& a : adapters_) {
        n += a->calls();
    }
    return n;
}

}  // namespace objtrans
