#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "objtrans/protocol.hpp"

namespace objtrans {

using protocol::DetectRequest;
using protocol::DetectResponse;

/// Anything that answers detection requests. One request in flight at a time.
class DetectorAdapter {
public:
    virtual ~DetectorAdapter() = default;

    /// Raw adapter answer; use objtrans::detect() for the normalized result.
    virtual DetectResponse handle(const DetectRequest& req) = 0;

    /// Number of requests answered so far.
    virtual std::uint64_t calls() const = 0;
};

/// Sends the request and normalizes the reply: boxes clipped to the unit
/// square, detections sorted by descending score (stable), run tag unset.
/// Throws AdapterError when the reply violates the request contract.
DetectResponse detect(DetectorAdapter& adapter, const DetectRequest& req);

struct ProcessAdapterOptions {
    std::string command;  // run through /bin/sh -c
    std::chrono::milliseconds timeout{30000};
    bool inline_images = false;
    // Where in-memory frames are written when sent by path. Empty means a
    // private directory under the system temp dir, removed on destruction.
    std::filesystem::path scratch_dir;
};

/// External detector speaking objtrans/1 over stdin/stdout.
class ProcessAdapter final : public DetectorAdapter {
public:
    /// Spawns the process and waits for the handshake. Throws AdapterError on
    /// spawn failure, timeout, exit, or version mismatch.
    explicit ProcessAdapter(ProcessAdapterOptions options);
    ~ProcessAdapter() override;

    ProcessAdapter(const ProcessAdapter&) = delete;
    ProcessAdapter& operator=(const ProcessAdapter&) = delete;

    DetectResponse handle(const DetectRequest& req) override;
    std::uint64_t calls() const override { return calls_; }

    /// Last bytes the child wrote to stderr.
    std::string stderr_tail() const { return stderr_tail_; }

private:
    std::string read_line();
    void write_line(const std::string& line);
    void drain_stderr();
    void shutdown();
    [[noreturn]] void fail(const std::string& what);

    ProcessAdapterOptions options_;
    int pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    int stderr_fd_ = -1;
    std::string stdout_buf_;
    std::string stderr_tail_;
    std::filesystem::path scratch_;
    bool owns_scratch_ = false;
    std::uint64_t calls_ = 0;
};

/// Fixed-size set of adapters; the UQ engine spreads perturbation runs over it.
class AdapterPool {
public:
    using Factory = std::function<std::unique_ptr<DetectorAdapter>(std::size_t index)>;

    AdapterPool(std::size_t size, const Factory& factory);
    explicit AdapterPool(std::unique_ptr<DetectorAdapter> single);

    std::size_t size() const { return adapters_.size(); }
    DetectorAdapter& at(std::size_t i) { return *adapters_.at(i); }
    std::uint64_t total_calls() const;

private:
    std::vector<std::unique_ptr<DetectorAdapter>> adapters_;
};

}  // namespace objtrans
