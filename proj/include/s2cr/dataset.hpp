#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "s2cr/image.hpp"
#include "s2cr/model.hpp"

namespace s2cr {

/// Composite, mask and ground truth; composite and target differ only on
/// masked pixels.
struct TrainSample {
  ImageBuffer composite;
  MaskBuffer mask;
  ImageBuffer target;
  std::optional<SemanticLabel> label;
};

/// Random-access sample source. get() is deterministic for a given index.
class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual TrainSample get(std::size_t index) const = 0;
};

class InMemoryDataset : public Dataset {
 public:
  explicit InMemoryDataset(std::vector<TrainSample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  TrainSample get(std::size_t index) const override { return samples_.at(index); }

 private:
  std::vector<TrainSample> samples_;
};

/// JSON-lines manifest, one {"composite", "mask", "target", "label"?} object
/// per line; relative paths resolve against the manifest's directory. Entries
/// are validated on construction (Error(kFormat) names the line); images are
/// decoded on demand.
class ManifestDataset : public Dataset {
 public:
  explicit ManifestDataset(const std::filesystem::path& manifest);
  std::size_t size() const override { return entries_.size(); }
  TrainSample get(std::size_t index) const override;

 private:
  struct Entry {
    std::filesystem::path composite;
    std::filesystem::path mask;
    std::filesystem::path target;
    std::optional<SemanticLabel> label;
    int line = 0;
  };
  std::vector<Entry> entries_;
};

}  // namespace s2cr
