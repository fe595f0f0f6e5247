#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>

#include "objtrans/config.hpp"

namespace objtrans::cli {

/// Timestamped lines written next to the output directory (<out>.run.log), so
/// the output tree itself stays byte-identical between runs.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(const std::filesystem::path& out_dir);
    void line(const std::string& msg);

private:
    std::ofstream file_;
};

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

int cmd_augment(const RunConfig& cfg, Streams io);
int cmd_uq(const RunConfig& cfg, Streams io);
int cmd_eval(const RunConfig& cfg, Streams io);
int cmd_calibrate(const RunConfig& cfg, Streams io);
int cmd_decompose(const RunConfig& cfg, Streams io);
int cmd_bench(const RunConfig& cfg, Streams io);

}  // namespace objtrans::cli
