#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "witten/acceptance.hpp"
#include "witten/scenario.hpp"

namespace fs = std::filesystem;
using namespace witten;

namespace {

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InvalidInput("cli", "write", "cannot open '" + path.string() + "' for writing");
    out << text;
}

scenario::Scenario load(const std::string& file)
{
    std::ifstream in(file);
    if (!in)
        throw InvalidInput("cli", "run", "cannot read scenario file '" + file + "'");
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw InvalidInput("cli", "run", "'" + file + "' is not valid JSON: " + e.what());
    }
    return scenario::parse(j);
}

int run(const std::string& file, std::uint64_t seed, const fs::path& out)
{
    const auto sc = load(file);
    const auto result = scenario::run(sc, seed);
    fs::create_directories(out);
    write_file(out / sc.spectra_path, result.csv);
    write_file(out / sc.report_path, result.report.dump(2) + "\n");
    std::cout << "scenario " << sc.name << ": " << result.report["verdicts"].dump() << "\n"
              << "wrote " << (out / sc.spectra_path).string() << ", " << (out / sc.report_path).string() << "\n";
    return result.pass ? 0 : 2;
}

int accept(const std::string& suite, std::uint64_t seed, const fs::path& out)
{
    const auto ids = acceptance::suite(suite);   // rejects unknown names before any work
    (void)ids;
    const auto start = std::chrono::steady_clock::now();
    const auto results = acceptance::run_suite(suite, seed, [](const acceptance::Result& r) {
        std::cout << acceptance::format_line(r) << std::endl;
    });
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    int failed = 0;
    for (const auto& r : results)
        failed += !r.pass;
    fs::create_directories(out);
    const fs::path path = out / ("accept-" + suite + ".json");
    write_file(path, acceptance::report(suite, seed, results).dump(2) + "\n");
    std::cout << "runtime " << total << " s, " << failed << " failed, report " << path.string() << std::endl;
    return failed == 0 ? 0 : 2;
}

}   // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Witten deformation laboratory: scenario runs and the acceptance suite"};
    app.require_subcommand(0, 1);
    std::uint64_t seed = 20240501;
    std::string out = ".";
    bool list = false;
    app.add_option("--seed", seed, "seed for randomised checks")->capture_default_str();
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_flag("--list", list, "print the built-in scenarios as JSON");

    std::string file;
    auto* run_cmd = app.add_subcommand("run", "run a scenario file");
    run_cmd->add_option("file", file, "scenario JSON")->required();

    std::string suite;
    auto* accept_cmd = app.add_subcommand("accept", "run acceptance checks");
    accept_cmd->add_option("suite", suite, "all or a module name")
        ->required()
        ->check(CLI::IsMember(acceptance::suite_names()));

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (list)
        {
            for (const auto& sc : scenario::builtin())
                std::cout << scenario::to_json(sc).dump() << "\n";
            return 0;
        }
        if (*run_cmd)
            return run(file, seed, out);
        if (*accept_cmd)
            return accept(suite, seed, out);
        std::cerr << app.help();
        return 64;
    }
    catch (const Error& e)
    {
        std::cerr << "error in " << e.module() << "::" << e.operation() << "\n  " << e.what() << "\n";
        if (!file.empty())
            std::cerr << "  input: " << file << "\n";
        return 1;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
