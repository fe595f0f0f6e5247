// Mock detector process speaking objtrans/1 on stdin/stdout.
#include <CLI11.hpp>

#include <iostream>

#include "objtrans/errors.hpp"
#include "objtrans/mock_detector.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Deterministic mock detector (objtrans/1 over stdio)"};
    std::string spec_path;
    app.add_option("--spec", spec_path, "mock detector spec (JSON)")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        objtrans::MockDetector det(objtrans::MockDetectorSpec::load(spec_path));
        std::ios::sync_with_stdio(false);
        objtrans::serve_protocol(det, std::cin, std::cout);
    } catch (const objtrans::ConfigError& e) {
        std::cerr << "mock detector: " << e.what() << '\n';
        return static_cast<int>(objtrans::ExitCode::config);
    } catch (const std::exception& e) {
        std::cerr << "mock detector: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
