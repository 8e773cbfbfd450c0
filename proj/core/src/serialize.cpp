#include "hmsq/serialize.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace hmsq {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    file >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path);
  file << j.dump(2) << '\n';
  if (!file) throw std::runtime_error("write failed for " + path);
}

json model_to_json(const HmmModel& model) {
  model.validate();
  json j;
  j["n_states"] = model.n_states;
  j["pi"] = model.initial;
  j["A"] = model.transition;
  if (model.is_gaussian()) {
    const auto& g = model.gaussian();
    j["emissions"] = {{"kind", "gaussian"}, {"means", g.means}, {"vars", g.vars}};
  } else {
    j["emissions"] = {{"kind", "discrete"}, {"probs", model.discrete().probs}};
  }
  return j;
}

HmmModel model_from_json(const json& j) {
  HmmModel model;
  model.n_states = j.at("n_states").get<int>();
  model.initial = j.at("pi").get<std::vector<double>>();
  model.transition = j.at("A").get<Matrix>();
  const json& em = j.at("emissions");
  const std::string kind = em.at("kind").get<std::string>();
  if (kind == "gaussian") {
    model.emissions = GaussianEmissions{em.at("means").get<std::vector<double>>(),
                                        em.at("vars").get<std::vector<double>>()};
  } else if (kind == "discrete") {
    model.emissions = DiscreteEmissions{em.at("probs").get<Matrix>()};
  } else {
    throw std::runtime_error("unknown emission kind: " + kind);
  }
  model.validate();
  return model;
}

json codebook_to_json(const Codebook& cb) {
  return json{{"codewords", cb.reps}, {"boundaries", cb.thresholds}};
}

Codebook codebook_from_json(const json& j) {
  Codebook cb;
  cb.reps = j.at("codewords").get<std::vector<double>>();
  cb.thresholds = j.at("boundaries").get<std::vector<double>>();
  cb.validate();
  return cb;
}

json system_to_json(const CodecSystem& system) {
  system.validate();
  json j;
  j["type"] = "tracking";
  j["model"] = model_to_json(system.model);
  j["rate_bits"] = system.rate_bits;
  j["n_classes"] = system.n_classes;
  json reps = json::array();
  for (const auto& rep : system.class_reps) reps.push_back(rep.probs);
  j["class_reps"] = std::move(reps);
  json cbs = json::array();
  for (const auto& cb : system.class_codebooks) cbs.push_back(codebook_to_json(cb));
  j["class_codebooks"] = std::move(cbs);
  j["initial_codebook"] = codebook_to_json(system.initial_codebook);
  j["online_lloyd_iters"] = system.online_lloyd_iters;
  return j;
}

CodecSystem system_from_json(const json& j) {
  CodecSystem system;
  system.model = model_from_json(j.at("model"));
  system.rate_bits = j.at("rate_bits").get<int>();
  system.n_classes = j.at("n_classes").get<int>();
  for (const json& rep : j.at("class_reps"))
    system.class_reps.push_back(StateBelief::normalized(rep.get<std::vector<double>>()));
  for (const json& cb : j.at("class_codebooks"))
    system.class_codebooks.push_back(codebook_from_json(cb));
  system.initial_codebook = codebook_from_json(j.at("initial_codebook"));
  system.online_lloyd_iters = j.at("online_lloyd_iters").get<int>();
  system.validate();
  return system;
}

json dpcm_to_json(const DpcmCodec& codec) {
  codec.validate();
  return json{{"type", "dpcm"},
              {"predictor", codec.predictor},
              {"init_value", codec.init_value},
              {"residual_codebook", codebook_to_json(codec.residual_codebook)},
              {"rate_bits", codec.rate_bits}};
}

DpcmCodec dpcm_from_json(const json& j) {
  DpcmCodec codec;
  codec.predictor = j.at("predictor").get<double>();
  codec.init_value = j.at("init_value").get<double>();
  codec.residual_codebook = codebook_from_json(j.at("residual_codebook"));
  codec.rate_bits = j.at("rate_bits").get<int>();
  codec.validate();
  return codec;
}

json fsq_to_json(const FsqCodec& codec) {
  codec.validate();
  json cbs = json::array();
  for (const auto& cb : codec.state_codebooks) cbs.push_back(codebook_to_json(cb));
  return json{{"type", "fsq"},
              {"rate_bits", codec.rate_bits},
              {"state_codebooks", std::move(cbs)},
              {"next_state", codec.next_state},
              {"train_mean", codec.train_mean}};
}

FsqCodec fsq_from_json(const json& j) {
  FsqCodec codec;
  codec.rate_bits = j.at("rate_bits").get<int>();
  for (const json& cb : j.at("state_codebooks"))
    codec.state_codebooks.push_back(codebook_from_json(cb));
  codec.next_state = j.at("next_state").get<std::vector<std::vector<int>>>();
  codec.train_mean = j.at("train_mean").get<double>();
  codec.validate();
  return codec;
}

json scalable_to_json(const ScalableSystem& system) {
  system.validate();
  json j = system_to_json(system.base);
  return json{{"type", "scalable"},
              {"base", std::move(j)},
              {"enh_rate_bits", system.enh_rate_bits},
              {"delay_window", system.delay_window},
              {"enh_online_lloyd_iters", system.enh_online_lloyd_iters},
              {"clip_sigma", system.clip_sigma}};
}

ScalableSystem scalable_from_json(const json& j) {
  ScalableSystem system;
  system.base = system_from_json(j.at("base"));
  system.enh_rate_bits = j.at("enh_rate_bits").get<int>();
  system.delay_window = j.at("delay_window").get<int>();
  system.enh_online_lloyd_iters = j.at("enh_online_lloyd_iters").get<int>();
  system.clip_sigma = j.at("clip_sigma").get<double>();
  system.validate();
  return system;
}

}  // namespace

void save_model(const HmmModel& model, const std::string& path) {
  write_json(model_to_json(model), path);
}

HmmModel load_model(const std::string& path) { return model_from_json(load_json(path)); }

void save_system(const CodecSystem& system, const std::string& path) {
  write_json(system_to_json(system), path);
}

CodecSystem load_system(const std::string& path) {
  const json j = load_json(path);
  if (j.contains("type") && j.at("type").get<std::string>() != "tracking")
    throw std::runtime_error(path + ": not a tracking system file");
  return system_from_json(j);
}

void save_dpcm(const DpcmCodec& codec, const std::string& path) {
  write_json(dpcm_to_json(codec), path);
}

DpcmCodec load_dpcm(const std::string& path) {
  const json j = load_json(path);
  if (j.at("type").get<std::string>() != "dpcm")
    throw std::runtime_error(path + ": not a dpcm codec file");
  return dpcm_from_json(j);
}

void save_fsq(const FsqCodec& codec, const std::string& path) {
  write_json(fsq_to_json(codec), path);
}

FsqCodec load_fsq(const std::string& path) {
  const json j = load_json(path);
  if (j.at("type").get<std::string>() != "fsq")
    throw std::runtime_error(path + ": not an fsq codec file");
  return fsq_from_json(j);
}

void save_scalable(const ScalableSystem& system, const std::string& path) {
  write_json(scalable_to_json(system), path);
}

ScalableSystem load_scalable(const std::string& path) {
  const json j = load_json(path);
  if (j.at("type").get<std::string>() != "scalable")
    throw std::runtime_error(path + ": not a scalable system file");
  return scalable_from_json(j);
}

std::string system_type(const std::string& path) {
  const json j = load_json(path);
  if (!j.contains("type")) return "tracking";
  const std::string type = j.at("type").get<std::string>();
  if (type != "tracking" && type != "dpcm" && type != "fsq" && type != "scalable")
    throw std::runtime_error(path + ": unknown system type " + type);
  return type;
}

}  // namespace hmsq
