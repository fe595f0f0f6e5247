#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace objtrans {

/// Flat key=value configuration. Keys carry section prefixes ("uq.k",
/// "adapter.cmd"); '#' starts a comment. Every key must be known, and every
/// typed read validates its value, throwing ConfigError.
class RunConfig {
public:
    RunConfig();

    static RunConfig from_file(const std::filesystem::path& path);

    /// Overrides one key; throws ConfigError for unknown keys.
    void set(const std::string& key, const std::string& value);
    bool is_set(const std::string& key) const { return explicit_.contains(key); }

    std::string str(const std::string& key) const;
    std::optional<std::string> opt_str(const std::string& key) const;
    double real(const std::string& key) const;
    long long integer(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;  // comma separated

    /// Sorted key = value lines for every key except run-local ones (jobs,
    /// out), so equal configs echo equal bytes.
    std::string effective_text() const;

    static const std::map<std::string, std::string>& defaults();

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> explicit_;
};

}  // namespace objtrans
