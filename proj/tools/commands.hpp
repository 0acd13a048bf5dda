#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

// Command cores shared by the CLI front end and the acceptance suite. Each
// runner consumes a plain JSON argument object, writes its outputs plus a
// manifest.json into out_dir, and throws hawkesmix::invalid_input (usage
// errors) or std::runtime_error (numerical/runtime failures). The manifest
// records {command, args, seed, inputs, outputs, version, wall_clock_sec};
// feeding its command/args back through dispatch() reproduces every output
// byte for byte (the manifest itself differs only in wall_clock_sec).
namespace hawkesmix::cli {

using json = nlohmann::json;

void run_simulate(const json& args, const std::filesystem::path& out_dir);
void run_fit(const json& args, const std::filesystem::path& out_dir);
void run_assign(const json& args, const std::filesystem::path& out_dir);
void run_evaluate(const json& args, const std::filesystem::path& out_dir);
void run_sweep(const json& args, const std::filesystem::path& out_dir);

// Routes a manifest-recorded command name to its runner.
void dispatch(const std::string& command, const json& args, const std::filesystem::path& out_dir);

// Re-executes the command recorded in an existing manifest into a fresh
// output directory.
void run_rerun(const std::filesystem::path& manifest_file, const std::filesystem::path& out_dir);

}  // namespace hawkesmix::cli
