#include "s2cr/curve_io.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "s2cr/error.hpp"

namespace s2cr {
namespace {

using nlohmann::json;

constexpr const char* kChannelNames[3] = {"r", "g", "b"};

json curve_set_object(const CurveParams& params) {
  json channels = json::object();
  for (int c = 0; c < 3; ++c) {
    const auto w = params.channel(c).weights();
    channels[kChannelNames[c]] = std::vector<double>(w.begin(), w.end());
  }
  json out = json::object();
  out["version"] = kCurveFormatVersion;
  out["levels"] = params.levels();
  out["channels"] = std::move(channels);
  return out;
}

void check_version(const json& doc) {
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != kCurveFormatVersion) {
    fail(ErrorKind::kFormat, "curve document has missing or unsupported version");
  }
}

CurveParams parse_curve_set(const json& doc, const std::string& where) {
  if (!doc.is_object()) fail(ErrorKind::kFormat, where + ": expected an object");
  check_version(doc);
  if (!doc.contains("levels") || !doc["levels"].is_number_integer()) {
    fail(ErrorKind::kFormat, where + ": missing integer 'levels'");
  }
  const int levels = doc["levels"].get<int>();
  if (levels < 2) fail(ErrorKind::kFormat, where + ": levels must be >= 2");
  if (!doc.contains("channels") || !doc["channels"].is_object()) {
    fail(ErrorKind::kFormat, where + ": missing 'channels' object");
  }
  const json& channels = doc["channels"];
  std::vector<ChannelCurve> curves;
  for (const char* name : kChannelNames) {
    const std::string label = where + ": channel '" + name + "'";
    if (!channels.contains(name) || !channels[name].is_array()) {
      fail(ErrorKind::kFormat, label + " missing");
    }
    const json& arr = channels[name];
    if (static_cast<int>(arr.size()) != levels) {
      fail(ErrorKind::kFormat, label + " has " + std::to_string(arr.size()) +
                                   " weights, expected " + std::to_string(levels));
    }
    std::vector<double> w(levels);
    double sum = 0.0;
    for (int i = 0; i < levels; ++i) {
      if (!arr[i].is_number()) {
        fail(ErrorKind::kFormat, label + " index " + std::to_string(i) + " is not a number");
      }
      w[i] = arr[i].get<double>();
      if (!std::isfinite(w[i])) {
        fail(ErrorKind::kFormat, label + " index " + std::to_string(i) + " is not finite");
      }
      if (w[i] < 0.0) {
        fail(ErrorKind::kFormat, label + " index " + std::to_string(i) + " is negative");
      }
      sum += w[i];
    }
    if (!(sum >= kMinCurveMass)) {
      fail(ErrorKind::kFormat, label + " has total weight below " +
                                   std::to_string(kMinCurveMass));
    }
    curves.emplace_back(std::move(w));
  }
  return CurveParams(curves[0], curves[1], curves[2]);
}

}  // namespace

std::string curves_to_json(const CurveParams& params) {
  return curve_set_object(params).dump();
}

std::string curve_stages_to_json(const std::vector<CurveParams>& stages) {
  json arr = json::array();
  for (const auto& s : stages) arr.push_back(curve_set_object(s));
  json out = json::object();
  out["version"] = kCurveFormatVersion;
  out["stages"] = std::move(arr);
  return out.dump();
}

std::vector<CurveParams> curve_stages_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("curve document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::kFormat, "curve document must be an object");
  if (doc.contains("stages")) {
    check_version(doc);
    if (!doc["stages"].is_array() || doc["stages"].empty()) {
      fail(ErrorKind::kFormat, "'stages' must be a non-empty array");
    }
    std::vector<CurveParams> out;
    for (std::size_t i = 0; i < doc["stages"].size(); ++i) {
      out.push_back(parse_curve_set(doc["stages"][i], "stage " + std::to_string(i)));
    }
    for (const auto& s : out) {
      if (s.levels() != out.front().levels()) {
        fail(ErrorKind::kFormat, "stages disagree on level count");
      }
    }
    return out;
  }
  return {parse_curve_set(doc, "curves")};
}

CurveParams curves_from_json(const std::string& text) {
  auto stages = curve_stages_from_json(text);
  if (stages.size() != 1) {
    fail(ErrorKind::kFormat, "expected a single curve set, got " +
                                 std::to_string(stages.size()) + " stages");
  }
  return stages.front();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<CurveParams> read_curve_file(const std::filesystem::path& path) {
  return curve_stages_from_json(read_text_file(path));
}

}  // namespace s2cr
