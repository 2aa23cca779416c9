#include <cmath>

#include "pourbench/errors.hpp"
#include "pourbench/json_io.hpp"
#include "pourbench/training.hpp"

namespace pourbench {

using nlohmann::json;

namespace {

json tensor_to_json(const LstmParams& p, const LstmParams::Tensor& t) {
  const double* base = p.values().data() + t.offset;
  if (t.rows == 1 && t.cols == 1) return base[0];
  if (t.cols == 1) {
    json v = json::array();
    for (int r = 0; r < t.rows; ++r) v.push_back(base[r]);
    return v;
  }
  json m = json::array();
  for (int r = 0; r < t.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < t.cols; ++c) {
      row.push_back(base[static_cast<std::size_t>(c) * static_cast<std::size_t>(t.stride) +
                         static_cast<std::size_t>(r)]);
    }
    m.push_back(std::move(row));
  }
  return m;
}

[[noreturn]] void shape_error(const std::string& name, const std::string& detail) {
  throw ValidationError("checkpoint tensor '" + name + "': " + detail);
}

double finite_number(const json& v, const std::string& name) {
  if (!v.is_number()) shape_error(name, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) shape_error(name, "non-finite value");
  return x;
}

void tensor_from_json(const json& j, const LstmParams::Tensor& t, LstmParams& p) {
  double* base = p.values().data() + t.offset;
  if (t.rows == 1 && t.cols == 1) {
    base[0] = finite_number(j, t.name);
    return;
  }
  if (t.cols == 1) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(t.rows)) {
      shape_error(t.name, "expected " + std::to_string(t.rows) + " entries");
    }
    for (int r = 0; r < t.rows; ++r) base[r] = finite_number(j[static_cast<std::size_t>(r)], t.name);
    return;
  }
  if (!j.is_array() || j.size() != static_cast<std::size_t>(t.rows)) {
    shape_error(t.name, "expected " + std::to_string(t.rows) + " rows");
  }
  for (int r = 0; r < t.rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(t.cols)) {
      shape_error(t.name, "expected " + std::to_string(t.cols) + " columns in row " +
                              std::to_string(r));
    }
    for (int c = 0; c < t.cols; ++c) {
      base[static_cast<std::size_t>(c) * static_cast<std::size_t>(t.stride) +
           static_cast<std::size_t>(r)] = finite_number(row[static_cast<std::size_t>(c)], t.name);
    }
  }
}

json hyper_to_json(const TrainHyper& h) {
  return {{"lr", h.lr},         {"epochs", h.epochs},   {"batch", h.batch},
          {"clip_norm", h.clip_norm}, {"seed", h.seed}, {"val_frac", h.val_frac},
          {"hidden", h.hidden}};
}

const json& required(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("checkpoint missing field '") + key + "'");
  return *it;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& cp, const std::string& path) {
  json params = json::object();
  for (const auto& t : cp.params.tensors()) params[t.name] = tensor_to_json(cp.params, t);

  json losses = json::array();
  for (const EpochRecord& r : cp.metadata.history) {
    losses.push_back({{"epoch", r.epoch}, {"train_mse", r.train_mse}, {"val_mse", r.val_mse}});
  }
  const TrainMetadata& m = cp.metadata;
  json doc = {
      {"format_version", kFormatVersion},
      {"input_dim", cp.params.input_dim()},
      {"hidden", cp.params.hidden()},
      {"params", std::move(params)},
      {"norm", {{"mean", cp.norm.mean}, {"std", cp.norm.std}}},
      {"metadata",
       {{"seed", m.seed},
        {"epochs", m.epochs},
        {"best_epoch", m.best_epoch},
        {"initial_val_mse", m.initial_val_mse},
        {"best_val_mse", m.best_val_mse},
        {"train_trials", m.train_trials},
        {"val_trials", m.val_trials},
        {"hyper", hyper_to_json(m.hyper)},
        {"losses", std::move(losses)}}},
  };
  write_json_file(path, doc);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw ValidationError("checkpoint must be a JSON object");
  const json& version = required(doc, "format_version");
  if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
    throw ValidationError("unsupported checkpoint format_version");
  }
  const json& jin = required(doc, "input_dim");
  const json& jh = required(doc, "hidden");
  if (!jin.is_number_integer() || !jh.is_number_integer() || jin.get<int>() < 1 ||
      jh.get<int>() < 1) {
    throw ValidationError("checkpoint dims must be positive integers");
  }

  ModelCheckpoint cp;
  cp.params = LstmParams(jin.get<int>(), jh.get<int>());
  const json& params = required(doc, "params");
  for (const auto& t : cp.params.tensors()) {
    const auto it = params.find(t.name);
    if (it == params.end()) shape_error(t.name, "missing");
    tensor_from_json(*it, t, cp.params);
  }

  const json& norm = required(doc, "norm");
  for (const char* key : {"mean", "std"}) {
    const json& v = required(norm, key);
    if (!v.is_array() || v.size() != kNumFeatures) {
      throw ValidationError(std::string("norm.") + key + " must have 6 entries");
    }
  }
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    cp.norm.mean[i] = finite_number(norm["mean"][i], "norm.mean");
    cp.norm.std[i] = finite_number(norm["std"][i], "norm.std");
    if (!(cp.norm.std[i] > 0.0)) throw ValidationError("norm.std entries must be > 0");
  }

  if (auto it = doc.find("metadata"); it != doc.end() && it->is_object()) {
    const json& m = *it;
    TrainMetadata& meta = cp.metadata;
    meta.seed = m.value("seed", std::uint64_t{0});
    meta.epochs = m.value("epochs", 0);
    meta.best_epoch = m.value("best_epoch", 0);
    meta.initial_val_mse = m.value("initial_val_mse", 0.0);
    meta.best_val_mse = m.value("best_val_mse", 0.0);
    meta.train_trials = m.value("train_trials", std::size_t{0});
    meta.val_trials = m.value("val_trials", std::size_t{0});
    if (auto h = m.find("hyper"); h != m.end() && h->is_object()) {
      meta.hyper.lr = h->value("lr", meta.hyper.lr);
      meta.hyper.epochs = h->value("epochs", meta.hyper.epochs);
      meta.hyper.batch = h->value("batch", meta.hyper.batch);
      meta.hyper.clip_norm = h->value("clip_norm", meta.hyper.clip_norm);
      meta.hyper.seed = h->value("seed", meta.hyper.seed);
      meta.hyper.val_frac = h->value("val_frac", meta.hyper.val_frac);
      meta.hyper.hidden = h->value("hidden", meta.hyper.hidden);
    }
    if (auto l = m.find("losses"); l != m.end() && l->is_array()) {
      for (const json& r : *l) {
        meta.history.push_back({r.value("epoch", 0), r.value("train_mse", 0.0),
                                r.value("val_mse", 0.0)});
      }
    }
  }
  return cp;
}

}  // namespace pourbench
