#include "s2cr/training.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>

#include "s2cr/error.hpp"
#include "s2cr/parallel.hpp"
#include "s2cr/png_io.hpp"
#include "s2cr/synth.hpp"

namespace s2cr {
namespace {

using nlohmann::json;

json metric_json(const MetricReport& r) {
  json j = json::parse(r.to_json());
  return j;
}

double finite_or_cap(double v) { return std::isfinite(v) ? v : 999.0; }

}  // namespace

void adamw_step(OptimizerState& state, std::span<const ParamView> params,
                std::span<const ConstParamView> grads) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::kDimension, "adamw: parameter/gradient count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values.size() != grads[i].values.size()) {
      fail(ErrorKind::kDimension, "adamw: shape mismatch for " + params[i].name);
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    fail(ErrorKind::kDimension, "adamw: optimizer state does not match parameters");
  }
  const AdamWConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double decay = 1.0 - c.lr * c.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].values;
    const auto g = grads[i].values;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != w.size()) {
      fail(ErrorKind::kDimension, "adamw: optimizer state shape mismatch for " + params[i].name);
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] = w[j] * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void adamw_step(OptimizerState& state, HarmonizerModel& model, const HarmonizerModel& grad) {
  if (!(model.config == grad.config)) {
    fail(ErrorKind::kDimension, "adamw: gradient belongs to a different configuration");
  }
  const auto params = model.parameters();
  const auto grads = grad.parameters();
  adamw_step(state, params, grads);
}

std::string EpochReport::to_json() const {
  json j{{"epoch", epoch}, {"loss", loss}};
  if (has_validation) {
    j["val_mse"] = val_mse;
    j["val_fmse"] = val_fmse;
    j["val_psnr"] = finite_or_cap(val_psnr);
  } else {
    j["val_mse"] = nullptr;
    j["val_fmse"] = nullptr;
    j["val_psnr"] = nullptr;
  }
  return j.dump();
}

std::vector<EpochReport> train(HarmonizerModel& model, const Dataset& dataset,
                               const TrainOptions& options) {
  if (dataset.size() == 0) fail(ErrorKind::kInvalidArgument, "training dataset is empty");
  if (options.batch_size < 1) fail(ErrorKind::kInvalidArgument, "batch size must be >= 1");
  if (options.epochs < 0) fail(ErrorKind::kInvalidArgument, "epochs must be >= 0");

  OptimizerState state;
  state.config = options.optimizer;
  std::mt19937_64 rng(mix_seed(options.seed, 0x7261696eull));
  std::vector<std::size_t> order(dataset.size());
  std::vector<EpochReport> reports;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const int count = static_cast<int>(end - start);
      std::vector<GradientResult> results(count);
      try {
        parallel_for(count, options.threads, [&](int b0, int b1) {
          for (int b = b0; b < b1; ++b) {
            results[b] = backward(model, dataset.get(order[start + b]));
          }
        });
      } catch (const Error& e) {
        fail(e.kind(), "epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      HarmonizerModel total = std::move(results[0].grad);
      loss_sum += results[0].loss;
      auto acc = total.parameters();
      for (int b = 1; b < count; ++b) {
        loss_sum += results[b].loss;
        const auto g = std::as_const(results[b].grad).parameters();
        for (std::size_t i = 0; i < acc.size(); ++i) {
          for (std::size_t j = 0; j < acc[i].values.size(); ++j) acc[i].values[j] += g[i].values[j];
        }
      }
      const double inv = 1.0 / count;
      for (auto& v : acc) {
        for (double& x : v.values) x *= inv;
      }
      adamw_step(state, model, total);
    }

    EpochReport report;
    report.epoch = epoch;
    report.loss = loss_sum / static_cast<double>(dataset.size());
    if (options.validation && options.validation->size() > 0) {
      const EvalReport eval = evaluate(model, *options.validation, options.threads);
      report.has_validation = true;
      report.val_mse = eval.buckets[3].model.mse;
      report.val_fmse = eval.buckets[3].model.fmse;
      report.val_psnr = eval.buckets[3].model.psnr;
    }
    if (options.on_epoch) options.on_epoch(report);
    reports.push_back(report);
  }
  return reports;
}

int fg_bucket(double fg_ratio) {
  if (fg_ratio < kBucketEdges[1]) return 0;
  if (fg_ratio < kBucketEdges[2]) return 1;
  return 2;
}

EvalReport evaluate(const HarmonizerModel& model, const Dataset& dataset, int threads) {
  if (dataset.size() == 0) fail(ErrorKind::kInvalidArgument, "evaluation dataset is empty");
  EvalReport report;
  report.buckets[0].name = "0-5%";
  report.buckets[1].name = "5-15%";
  report.buckets[2].name = "15-100%";
  report.buckets[3].name = "overall";
  report.samples.resize(dataset.size());
  parallel_for(static_cast<int>(dataset.size()), threads, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const TrainSample s = dataset.get(i);
      const ForwardResult r = forward(model, s.composite, s.mask, s.label);
      SampleEvaluation& e = report.samples[i];
      e.model = metrics(r.stage_images.back(), s.target, s.mask);
      e.baseline = metrics(s.composite, s.target, s.mask);
      e.fg_ratio = e.model.fg_ratio;
      for (const ImageBuffer& img : r.stage_images) {
        e.stage_fmse.push_back(foreground_mse(img, s.target, s.mask));
      }
    }
  });
  auto add = [](BucketReport& b, const SampleEvaluation& e) {
    b.count += 1;
    b.model.mse += e.model.mse;
    b.model.psnr += e.model.psnr;
    b.model.fmse += e.model.fmse;
    b.model.fg_ratio += e.fg_ratio;
    b.baseline.mse += e.baseline.mse;
    b.baseline.psnr += e.baseline.psnr;
    b.baseline.fmse += e.baseline.fmse;
    b.baseline.fg_ratio += e.fg_ratio;
  };
  for (auto& b : report.buckets) {
    b.model.psnr = 0.0;
    b.baseline.psnr = 0.0;
  }
  for (const auto& e : report.samples) {
    add(report.buckets[fg_bucket(e.fg_ratio)], e);
    add(report.buckets[3], e);
  }
  for (auto& b : report.buckets) {
    if (b.count == 0) continue;
    const double inv = 1.0 / static_cast<double>(b.count);
    for (MetricReport* r : {&b.model, &b.baseline}) {
      r->mse *= inv;
      r->psnr *= inv;
      r->fmse *= inv;
      r->fg_ratio *= inv;
    }
  }
  return report;
}

std::string EvalReport::to_json() const {
  json arr = json::array();
  for (const auto& b : buckets) {
    json j{{"bucket", b.name}, {"count", b.count}};
    if (b.count > 0) {
      j["model"] = metric_json(b.model);
      j["baseline"] = metric_json(b.baseline);
    }
    arr.push_back(std::move(j));
  }
  return json{{"buckets", std::move(arr)}}.dump();
}

ManifestDataset::ManifestDataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + manifest.string());
  const std::filesystem::path dir = manifest.parent_path();
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(number) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      fail(ErrorKind::kFormat, where + "not valid JSON");
    }
    if (!j.is_object()) fail(ErrorKind::kFormat, where + "expected an object");
    Entry e;
    e.line = number;
    for (auto [key, slot] : {std::pair{"composite", &e.composite}, std::pair{"mask", &e.mask},
                             std::pair{"target", &e.target}}) {
      if (!j.contains(key) || !j[key].is_string()) {
        fail(ErrorKind::kFormat, where + "missing string field '" + key + "'");
      }
      std::filesystem::path p = j[key].get<std::string>();
      if (p.is_relative()) p = dir / p;
      if (!std::filesystem::exists(p)) {
        fail(ErrorKind::kFormat, where + "file not found: " + p.string());
      }
      *slot = p;
    }
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string()) fail(ErrorKind::kFormat, where + "label must be a string");
      e.label = parse_label(j["label"].get<std::string>());
      if (!e.label) fail(ErrorKind::kFormat, where + "unknown label");
    }
    entries_.push_back(std::move(e));
  }
  if (entries_.empty()) fail(ErrorKind::kFormat, manifest.string() + ": manifest has no samples");
}

TrainSample ManifestDataset::get(std::size_t index) const {
  const Entry& e = entries_.at(index);
  TrainSample s{load_png(e.composite), load_mask_png(e.mask), load_png(e.target), e.label};
  if (s.composite.width() != s.mask.width() || s.composite.height() != s.mask.height() ||
      s.composite.width() != s.target.width() || s.composite.height() != s.target.height()) {
    fail(ErrorKind::kDimension, "manifest line " + std::to_string(e.line) +
                                    ": composite, mask and target sizes differ");
  }
  return s;
}

}  // namespace s2cr
