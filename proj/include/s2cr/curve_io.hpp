#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "s2cr/curve.hpp"

namespace s2cr {

/// Curve-parameter documents.
///
/// A single curve set is {"version": 1, "levels": L, "channels": {"r": [...],
/// "g": [...], "b": [...]}}. A staged document (one curve set per cascade
/// stage, applied in order) is {"version": 1, "stages": [<curve set>, ...]}.
/// Readers accept either shape and reject unknown versions, length mismatches,
/// negative or non-finite weights with Error(kFormat).
inline constexpr int kCurveFormatVersion = 1;

std::string curves_to_json(const CurveParams& params);
std::string curve_stages_to_json(const std::vector<CurveParams>& stages);

/// Parses either document shape into a list of stages.
std::vector<CurveParams> curve_stages_from_json(const std::string& text);
CurveParams curves_from_json(const std::string& text);

std::vector<CurveParams> read_curve_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace s2cr
