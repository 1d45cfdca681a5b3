#pragma once

// JSON documents written by the CLI: experiment reports and parameter
// files. Doubles are emitted in shortest round-trip form and object keys in
// sorted order, so equal inputs give byte-identical documents.

#include <filesystem>
#include <optional>
#include <string>

#include "fedcf/eval.hpp"
#include "fedcf/federation.hpp"
#include "fedcf/gp.hpp"

namespace fedcf {

std::string report_to_json(const ExperimentReport& report);

/// Stage timings as a small standalone JSON object.
std::string timings_to_json(const ExperimentReport& report);

/// {"params": {...}, "history": {...}?, "mode": "..."}
std::string params_document(const HyperParams& params, const std::string& mode,
                            const FederationHistory* history = nullptr);

/// Reads the "params" object of a parameter document. Log-space values are
/// used when present so that a written file reloads exactly.
HyperParams params_from_document(const std::string& json_text);
HyperParams load_params_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace fedcf
