#include "hmsq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "hmsq/baselines.hpp"
#include "hmsq/bounds.hpp"
#include "hmsq/loss.hpp"
#include "hmsq/rng.hpp"
#include "hmsq/scalable.hpp"
#include "hmsq/serialize.hpp"
#include "hmsq/tracking.hpp"

namespace hmsq {

namespace {

using nlohmann::json;

std::uint64_t str_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  return Rng::mix(seed, str_hash(tag));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_db(double mse) { return 10.0 * std::log10(std::max(mse, 1e-300)); }

class CellTimer {
 public:
  explicit CellTimer(std::string key) : key_(std::move(key)) {}
  std::pair<std::string, double> stop() const {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    return {key_, std::chrono::duration<double, std::milli>(elapsed).count()};
  }

 private:
  std::string key_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Everything identifying a grid cell except the seed.
std::string group_key(const ResultRow& r) {
  return r.method + '|' + fmt(r.transition_p) + '|' + std::to_string(r.rate_bits) + '|' +
         std::to_string(r.enh_rate_bits) + '|' + std::to_string(r.delay_window) + '|' +
         fmt(r.loss_rate);
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  if (a.method != b.method) return a.method < b.method;
  if (a.transition_p != b.transition_p) return a.transition_p < b.transition_p;
  if (a.rate_bits != b.rate_bits) return a.rate_bits < b.rate_bits;
  if (a.enh_rate_bits != b.enh_rate_bits) return a.enh_rate_bits < b.enh_rate_bits;
  if (a.delay_window != b.delay_window) return a.delay_window < b.delay_window;
  if (a.loss_rate != b.loss_rate) return a.loss_rate < b.loss_rate;
  return a.seed < b.seed;
}

// Append one aggregate row (seed -1, mean and standard error over seeds) per
// grid cell, then sort everything by key.
void finalize(std::vector<ResultRow>& rows) {
  std::map<std::string, std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) groups[group_key(r)].push_back(&r);

  std::vector<ResultRow> aggregates;
  for (const auto& [key, members] : groups) {
    (void)key;
    ResultRow agg = *members.front();
    agg.seed = -1;
    double mean = 0.0;
    for (const ResultRow* r : members) mean += r->distortion_db;
    mean /= members.size();
    double var = 0.0;
    for (const ResultRow* r : members) {
      const double d = r->distortion_db - mean;
      var += d * d;
    }
    agg.distortion_db = mean;
    agg.std_err =
        members.size() > 1 ? std::sqrt(var / (members.size() - 1) / members.size()) : 0.0;
    aggregates.push_back(agg);
  }
  rows.insert(rows.end(), aggregates.begin(), aggregates.end());
  std::sort(rows.begin(), rows.end(), row_less);
}

struct CellOutput {
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, double>> runtimes;
};

// Run one job per cell on the worker pool and splice the outputs in cell
// order, so the result is independent of scheduling.
ExperimentResult run_cells(std::size_t n,
                           const std::function<CellOutput(std::size_t)>& job) {
  std::vector<CellOutput> outputs(n);
  parallel_for(n, [&](std::size_t i) { outputs[i] = job(i); });
  ExperimentResult result;
  for (CellOutput& out : outputs) {
    result.rows.insert(result.rows.end(), out.rows.begin(), out.rows.end());
    result.runtimes_ms.insert(result.runtimes_ms.end(), out.runtimes.begin(),
                              out.runtimes.end());
  }
  finalize(result.rows);
  return result;
}

std::vector<double> sample_obs(const HmmModel& model, std::size_t len, std::uint64_t seed) {
  return sample(model, len, seed).observations;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (rates.empty()) throw std::invalid_argument("config: rates must be nonempty");
  for (int r : rates)
    if (r < 0 || r > 16) throw std::invalid_argument("config: rates must lie in 0..16");
  if (!(var1 > 0.0) || !(var2 > 0.0))
    throw std::invalid_argument("config: var1/var2 must be positive");
  if (model_path.empty() && !(transition_p > 0.0 && transition_p <= 1.0))
    throw std::invalid_argument("config: transition_p outside (0, 1]");
  if (n_classes < 1) throw std::invalid_argument("config: n_classes must be positive");
  if (fsq_states < 1) throw std::invalid_argument("config: fsq_states must be positive");
  if (train_len < 1000) throw std::invalid_argument("config: train_len below 1000");
  if (eval_len < 1000) throw std::invalid_argument("config: eval_len below 1000");
  for (double p : loss_rates)
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("config: loss_rates outside [0, 1)");
  for (double a : loss_transitions)
    if (!(a > 0.0 && a <= 1.0))
      throw std::invalid_argument("config: loss_transitions outside (0, 1]");
  for (double a : transition_grid)
    if (!(a > 0.0 && a <= 1.0))
      throw std::invalid_argument("config: transition_grid outside (0, 1]");
  auto check_rate = [](int r, const char* name) {
    if (r < 1 || r > 16)
      throw std::invalid_argument(std::string("config: ") + name + " outside 1..16");
  };
  check_rate(loss_rate_bits, "loss_rate_bits");
  check_rate(trans_rate_bits, "trans_rate_bits");
  check_rate(trans_layer_rate_bits, "trans_layer_rate_bits");
  check_rate(base_rate_bits, "base_rate_bits");
  check_rate(delayed_base_rate_bits, "delayed_base_rate_bits");
  for (int r : enh_rates) check_rate(r, "enh_rates");
  for (int r : delayed_enh_rates) check_rate(r, "delayed_enh_rates");
  for (int l : delay_windows)
    if (l < 0 || l > 255) throw std::invalid_argument("config: delay_windows outside 0..255");
}

HmmModel ExperimentConfig::source_model(double transition_override) const {
  if (!model_path.empty()) {
    if (transition_override >= 0.0)
      throw std::invalid_argument("config: cannot sweep the transition of a loaded model");
    return load_model(model_path);
  }
  const double p = transition_override >= 0.0 ? transition_override : transition_p;
  return make_two_state_source(mean1, mean2, var1, var2, p);
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::invalid_argument("config: cannot open " + path);
  json j;
  try {
    file >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }

  ExperimentConfig config;
  const std::set<std::string> known{
      "mean1",         "mean2",        "var1",
      "var2",          "transition_p", "model_path",
      "rates",         "n_classes",    "fsq_states",
      "train_len",     "eval_len",     "seeds",
      "loss_transitions", "loss_rates", "loss_rate_bits",
      "transition_grid", "trans_rate_bits", "trans_layer_rate_bits",
      "base_rate_bits", "enh_rates",   "delayed_base_rate_bits",
      "delayed_enh_rates", "delay_windows"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) throw std::invalid_argument("config: unknown field \"" + key + '"');
  }

  auto get = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("mean1", config.mean1);
  get("mean2", config.mean2);
  get("var1", config.var1);
  get("var2", config.var2);
  get("transition_p", config.transition_p);
  get("model_path", config.model_path);
  get("rates", config.rates);
  get("n_classes", config.n_classes);
  get("fsq_states", config.fsq_states);
  get("train_len", config.train_len);
  get("eval_len", config.eval_len);
  get("seeds", config.seeds);
  get("loss_transitions", config.loss_transitions);
  get("loss_rates", config.loss_rates);
  get("loss_rate_bits", config.loss_rate_bits);
  get("transition_grid", config.transition_grid);
  get("trans_rate_bits", config.trans_rate_bits);
  get("trans_layer_rate_bits", config.trans_layer_rate_bits);
  get("base_rate_bits", config.base_rate_bits);
  get("enh_rates", config.enh_rates);
  get("delayed_base_rate_bits", config.delayed_base_rate_bits);
  get("delayed_enh_rates", config.delayed_enh_rates);
  get("delay_windows", config.delay_windows);
  config.validate();
  return config;
}

double mean_squared_error(std::span<const double> x, std::span<const double> xhat) {
  if (x.size() != xhat.size())
    throw std::invalid_argument("mean_squared_error: length mismatch");
  if (x.empty()) throw std::invalid_argument("mean_squared_error: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - xhat[i];
    acc += d * d;
  }
  return acc / x.size();
}

double distortion_db(std::span<const double> x, std::span<const double> xhat) {
  return to_db(mean_squared_error(x, xhat));
}

ExperimentResult run_rd_sweep(const ExperimentConfig& config) {
  config.validate();
  const HmmModel model = config.source_model();
  const std::size_t n_cells = config.rates.size() * config.seeds.size();

  ExperimentResult result = run_cells(n_cells, [&](std::size_t i) {
    const int rate = config.rates[i / config.seeds.size()];
    const std::uint64_t seed = config.seeds[i % config.seeds.size()];
    const std::string tag = "rd|r=" + std::to_string(rate) + "|seed=" + std::to_string(seed);
    CellTimer timer(tag);

    const std::vector<double> train_obs =
        sample_obs(model, config.train_len, derive_seed(seed, "train"));
    const std::vector<double> eval_obs =
        sample_obs(model, config.eval_len, derive_seed(seed, "eval"));

    CellOutput out;
    auto emit = [&](const std::string& method, double db) {
      ResultRow row;
      row.method = method;
      row.transition_p = config.transition_p;
      row.rate_bits = rate;
      row.seed = static_cast<long long>(seed);
      row.distortion_db = db;
      out.rows.push_back(row);
    };

    const CodecSystem system = train_system(model, rate, config.n_classes, train_obs,
                                            derive_seed(seed, "tracking"));
    emit("tracking", distortion_db(eval_obs, decode(encode(eval_obs, system), system)));

    const DpcmCodec dpcm = dpcm_train(train_obs, rate);
    emit("dpcm", distortion_db(eval_obs, dpcm_decode(dpcm_encode(eval_obs, dpcm), dpcm)));

    const FsqCodec fsq = fsq_train(train_obs, config.fsq_states, rate);
    emit("fsq", distortion_db(eval_obs, fsq_decode(fsq_encode(eval_obs, fsq), fsq)));

    emit("bound_switched", to_db(bound_switched(model, rate)));
    emit("bound_clean", to_db(bound_clean_history(model, rate, eval_obs)));

    out.runtimes.push_back(timer.stop());
    return out;
  });
  result.notes.push_back("distortion_db = 10*log10(mean squared error)");
  return result;
}

ExperimentResult run_transition_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::size_t n_cells = config.transition_grid.size() * config.seeds.size();

  ExperimentResult result = run_cells(n_cells, [&](std::size_t i) {
    const double a = config.transition_grid[i / config.seeds.size()];
    const std::uint64_t seed = config.seeds[i % config.seeds.size()];
    const HmmModel model = config.source_model(a);
    const std::string tag = "trans|a=" + fmt(a) + "|seed=" + std::to_string(seed);
    CellTimer timer(tag);

    const std::vector<double> train_obs =
        sample_obs(model, config.train_len, derive_seed(seed, "train"));
    const std::vector<double> eval_obs =
        sample_obs(model, config.eval_len, derive_seed(seed, "eval"));

    CellOutput out;
    auto emit = [&](const std::string& method, int rate, int enh_rate, double db) {
      ResultRow row;
      row.method = method;
      row.transition_p = a;
      row.rate_bits = rate;
      row.enh_rate_bits = enh_rate;
      row.seed = static_cast<long long>(seed);
      row.distortion_db = db;
      out.rows.push_back(row);
    };

    // Single-layer comparison at the sweep rate.
    const int r1 = config.trans_rate_bits;
    const CodecSystem system =
        train_system(model, r1, config.n_classes, train_obs, derive_seed(seed, "tracking"));
    emit("tracking", r1, 0,
         distortion_db(eval_obs, decode(encode(eval_obs, system), system)));
    const DpcmCodec dpcm = dpcm_train(train_obs, r1);
    emit("dpcm", r1, 0,
         distortion_db(eval_obs, dpcm_decode(dpcm_encode(eval_obs, dpcm), dpcm)));
    const FsqCodec fsq = fsq_train(train_obs, config.fsq_states, r1);
    emit("fsq", r1, 0,
         distortion_db(eval_obs, fsq_decode(fsq_encode(eval_obs, fsq), fsq)));

    // Two-layer comparison with the same rate in both layers.
    const int r2 = config.trans_layer_rate_bits;
    ScalableSystem scalable;
    scalable.base = train_system(model, r2, config.n_classes, train_obs,
                                 derive_seed(seed, "scalable_base"));
    scalable.enh_rate_bits = r2;
    const ScalableStreams streams = encode_scalable(eval_obs, scalable);
    emit("scalable_tracking", r2, r2,
         distortion_db(eval_obs, decode_enh(streams.base_indices, streams.enh_indices,
                                            scalable)));
    const ScalableDpcm sdpcm = scalable_dpcm_train(train_obs, r2, r2);
    const ScalableDpcmStreams dstreams = scalable_dpcm_encode(eval_obs, sdpcm);
    emit("scalable_dpcm", r2, r2,
         distortion_db(eval_obs, scalable_dpcm_decode_enh(dstreams.base_indices,
                                                          dstreams.enh_indices, sdpcm)));

    out.runtimes.push_back(timer.stop());
    return out;
  });
  result.notes.push_back("distortion_db = 10*log10(mean squared error)");
  return result;
}

ExperimentResult run_loss_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::size_t per_a = config.loss_rates.size() * config.seeds.size();
  const std::size_t n_cells = config.loss_transitions.size() * per_a;

  ExperimentResult result = run_cells(n_cells, [&](std::size_t i) {
    const double a = config.loss_transitions[i / per_a];
    const double p_loss = config.loss_rates[(i % per_a) / config.seeds.size()];
    const std::uint64_t seed = config.seeds[i % config.seeds.size()];
    const HmmModel model = config.source_model(a);
    const int rate = config.loss_rate_bits;
    const std::string tag =
        "loss|a=" + fmt(a) + "|p=" + fmt(p_loss) + "|seed=" + std::to_string(seed);
    CellTimer timer(tag);

    const std::vector<double> train_obs =
        sample_obs(model, config.train_len, derive_seed(seed, "train"));
    const std::vector<double> eval_obs =
        sample_obs(model, config.eval_len, derive_seed(seed, "eval"));
    const LossChannel channel{p_loss,
                              derive_seed(seed, "chan|" + fmt(a) + '|' + fmt(p_loss))};

    CellOutput out;
    auto emit = [&](const std::string& method, double db) {
      ResultRow row;
      row.method = method;
      row.transition_p = a;
      row.rate_bits = rate;
      row.loss_rate = p_loss;
      row.seed = static_cast<long long>(seed);
      row.distortion_db = db;
      out.rows.push_back(row);
    };

    TrainOptions topts;
    topts.p_loss = p_loss;
    const CodecSystem system = train_system(model, rate, config.n_classes, train_obs,
                                            derive_seed(seed, "tracking"), topts);
    const std::vector<int> indices = encode_lossy(eval_obs, system, p_loss);
    const PacketStream stream = simulate_loss(indices, rate, channel);
    emit("tracking", distortion_db(eval_obs, decode_lossy(stream, system)));

    const DpcmCodec dpcm = dpcm_train(train_obs, rate);
    PacketStream dpcm_stream = simulate_loss(dpcm_encode(eval_obs, dpcm), rate, channel);
    emit("dpcm", distortion_db(eval_obs, dpcm_decode_lossy(dpcm_stream, dpcm)));

    const FsqCodec fsq = fsq_train(train_obs, config.fsq_states, rate);
    PacketStream fsq_stream = simulate_loss(fsq_encode(eval_obs, fsq), rate, channel);
    emit("fsq", distortion_db(eval_obs, fsq_decode_lossy(fsq_stream, fsq)));

    out.runtimes.push_back(timer.stop());
    return out;
  });
  result.notes.push_back("distortion_db = 10*log10(mean squared error)");
  result.notes.push_back("loss grid coded at " + std::to_string(config.loss_rate_bits) +
                         " bits/sample (unstated in the reproduced tables)");
  return result;
}

ExperimentResult run_scalable_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::size_t n_cells = config.seeds.size();

  ExperimentResult result = run_cells(n_cells, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    const HmmModel model = config.source_model();
    const int r12 = config.base_rate_bits;
    const std::string tag = "scalable|seed=" + std::to_string(seed);
    CellTimer timer(tag);

    const std::vector<double> train_obs =
        sample_obs(model, config.train_len, derive_seed(seed, "train"));
    const std::vector<double> eval_obs =
        sample_obs(model, config.eval_len, derive_seed(seed, "eval"));

    CellOutput out;
    auto emit = [&](const std::string& method, int enh_rate, double db) {
      ResultRow row;
      row.method = method;
      row.transition_p = config.transition_p;
      row.rate_bits = r12;
      row.enh_rate_bits = enh_rate;
      row.seed = static_cast<long long>(seed);
      row.distortion_db = db;
      out.rows.push_back(row);
    };

    ScalableSystem scalable;
    scalable.base = train_system(model, r12, config.n_classes, train_obs,
                                 derive_seed(seed, "scalable_base"));
    for (int r2 : config.enh_rates) {
      scalable.enh_rate_bits = r2;
      const ScalableStreams streams = encode_scalable(eval_obs, scalable);
      emit("scalable_tracking", r2,
           distortion_db(eval_obs,
                         decode_enh(streams.base_indices, streams.enh_indices, scalable)));

      const ScalableDpcm sdpcm = scalable_dpcm_train(train_obs, r12, r2);
      const ScalableDpcmStreams dstreams = scalable_dpcm_encode(eval_obs, sdpcm);
      emit("scalable_dpcm", r2,
           distortion_db(eval_obs, scalable_dpcm_decode_enh(dstreams.base_indices,
                                                            dstreams.enh_indices, sdpcm)));

      emit("bound_switched", r2, to_db(bound_switched(model, r12 + r2)));
    }

    out.runtimes.push_back(timer.stop());
    return out;
  });
  result.notes.push_back("distortion_db = 10*log10(mean squared error)");
  result.notes.push_back("bound_switched rows are evaluated at the total rate of both layers");
  return result;
}

ExperimentResult run_delayed_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::size_t n_cells = config.seeds.size();

  ExperimentResult result = run_cells(n_cells, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    const HmmModel model = config.source_model();
    const int r12 = config.delayed_base_rate_bits;
    const std::string tag = "delayed|seed=" + std::to_string(seed);
    CellTimer timer(tag);

    const std::vector<double> train_obs =
        sample_obs(model, config.train_len, derive_seed(seed, "train"));
    const std::vector<double> eval_obs =
        sample_obs(model, config.eval_len, derive_seed(seed, "eval"));

    CellOutput out;
    ScalableSystem scalable;
    scalable.base = train_system(model, r12, config.n_classes, train_obs,
                                 derive_seed(seed, "scalable_base"));
    for (int r2 : config.delayed_enh_rates) {
      scalable.enh_rate_bits = r2;
      for (int delay : config.delay_windows) {
        scalable.delay_window = delay;
        const ScalableStreams streams = encode_scalable(eval_obs, scalable);
        ResultRow row;
        row.method = "scalable_delayed";
        row.transition_p = config.transition_p;
        row.rate_bits = r12;
        row.enh_rate_bits = r2;
        row.delay_window = delay;
        row.seed = static_cast<long long>(seed);
        row.distortion_db = distortion_db(
            eval_obs, decode_enh(streams.base_indices, streams.enh_indices, scalable));
        out.rows.push_back(row);
      }
    }

    out.runtimes.push_back(timer.stop());
    return out;
  });
  result.notes.push_back("distortion_db = 10*log10(mean squared error)");
  return result;
}

ExperimentResult run_bounds_sweep(const ExperimentConfig& config) {
  config.validate();
  const HmmModel model = config.source_model();
  const std::size_t n_cells = config.rates.size() * config.seeds.size();

  ExperimentResult result = run_cells(n_cells, [&](std::size_t i) {
    const int rate = config.rates[i / config.seeds.size()];
    const std::uint64_t seed = config.seeds[i % config.seeds.size()];
    const std::string tag =
        "bounds|r=" + std::to_string(rate) + "|seed=" + std::to_string(seed);
    CellTimer timer(tag);

    const std::vector<double> eval_obs =
        sample_obs(model, config.eval_len, derive_seed(seed, "eval"));

    CellOutput out;
    auto emit = [&](const std::string& method, double db) {
      ResultRow row;
      row.method = method;
      row.transition_p = config.transition_p;
      row.rate_bits = rate;
      row.seed = static_cast<long long>(seed);
      row.distortion_db = db;
      out.rows.push_back(row);
    };
    emit("bound_switched", to_db(bound_switched(model, rate)));
    emit("bound_clean", to_db(bound_clean_history(model, rate, eval_obs)));

    out.runtimes.push_back(timer.stop());
    return out;
  });
  result.notes.push_back("distortion_db = 10*log10(mean squared error)");
  return result;
}

void write_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw std::runtime_error("write_csv: cannot open " + path);
  file << "method,transition_p,rate_bits,enh_rate_bits,delay_window,loss_rate,seed,"
          "distortion_db,std_err\n";
  for (const ResultRow& r : result.rows) {
    file << r.method << ',' << fmt(r.transition_p) << ',' << r.rate_bits << ','
         << r.enh_rate_bits << ',' << r.delay_window << ',' << fmt(r.loss_rate) << ','
         << r.seed << ',' << fmt(r.distortion_db) << ',' << fmt(r.std_err) << '\n';
  }
  if (!file) throw std::runtime_error("write_csv: write failed for " + path);
}

void write_meta(const ExperimentResult& result, const std::string& csv_path) {
  json j;
  j["notes"] = result.notes;
  json runtimes = json::object();
  for (const auto& [key, ms] : result.runtimes_ms) runtimes[key] = ms;
  j["runtimes_ms"] = std::move(runtimes);
  std::ofstream file(csv_path + ".meta.json", std::ios::trunc);
  if (!file) throw std::runtime_error("write_meta: cannot open " + csv_path + ".meta.json");
  file << j.dump(2) << '\n';
}

void write_plot_data(const ExperimentResult& result, const std::string& prefix,
                     const std::string& x_field) {
  const std::vector<std::string> fields{"rate_bits", "transition_p", "loss_rate",
                                        "enh_rate_bits", "delay_window"};
  if (std::find(fields.begin(), fields.end(), x_field) == fields.end())
    throw std::invalid_argument("write_plot_data: unknown x field " + x_field);
  auto value_of = [](const ResultRow& r, const std::string& field) {
    if (field == "rate_bits") return static_cast<double>(r.rate_bits);
    if (field == "transition_p") return r.transition_p;
    if (field == "loss_rate") return r.loss_rate;
    if (field == "enh_rate_bits") return static_cast<double>(r.enh_rate_bits);
    return static_cast<double>(r.delay_window);
  };

  // Qualifiers: non-x fields that actually vary across the aggregate rows.
  std::vector<const ResultRow*> agg;
  for (const ResultRow& r : result.rows)
    if (r.seed == -1) agg.push_back(&r);
  std::vector<std::string> varying;
  for (const std::string& f : fields) {
    if (f == x_field) continue;
    std::set<double> values;
    for (const ResultRow* r : agg) values.insert(value_of(*r, f));
    if (values.size() > 1) varying.push_back(f);
  }

  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const ResultRow* r : agg) {
    std::string key = r->method;
    for (const std::string& f : varying) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "_%s%g", f.c_str(), value_of(*r, f));
      key += buf;
    }
    series[key].push_back({value_of(*r, x_field), r->distortion_db});
  }
  for (auto& [key, points] : series) {
    std::sort(points.begin(), points.end());
    std::string name = key;
    for (char& c : name)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '-';
    std::ofstream file(prefix + "_" + name + ".dat", std::ios::trunc);
    if (!file) throw std::runtime_error("write_plot_data: cannot open series file");
    for (const auto& [x, y] : points) file << fmt(x) << ' ' << fmt(y) << '\n';
  }
}

namespace {

bool binary_extension(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos) return false;
  const std::string ext = path.substr(dot);
  return ext == ".f64" || ext == ".bin";
}

}  // namespace

std::vector<double> ingest_samples(const std::string& path) {
  if (binary_extension(path)) {
    std::ifstream file(path, std::ios::binary | std::ios::ate);
    if (!file) throw std::runtime_error("ingest_samples: cannot open " + path);
    const std::streamsize bytes = file.tellg();
    if (bytes == 0) throw std::runtime_error("ingest_samples: " + path + " is empty");
    if (bytes % static_cast<std::streamsize>(sizeof(double)) != 0)
      throw std::runtime_error("ingest_samples: " + path + " is not a whole number of doubles");
    file.seekg(0);
    std::vector<double> out(static_cast<std::size_t>(bytes) / sizeof(double));
    file.read(reinterpret_cast<char*>(out.data()), bytes);
    if (!file) throw std::runtime_error("ingest_samples: read failed for " + path);
    return out;
  }

  std::ifstream file(path);
  if (!file) throw std::runtime_error("ingest_samples: cannot open " + path);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      std::size_t consumed = 0;
      const double v = std::stod(line, &consumed);
      while (consumed < line.size() &&
             std::isspace(static_cast<unsigned char>(line[consumed])))
        ++consumed;
      if (consumed != line.size()) throw std::invalid_argument("trailing characters");
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error("ingest_samples: " + path + ":" + std::to_string(line_no) +
                               ": not a number: " + line);
    }
  }
  if (out.empty()) throw std::runtime_error("ingest_samples: " + path + " is empty");
  return out;
}

void write_samples(std::span<const double> samples, const std::string& path) {
  if (binary_extension(path)) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("write_samples: cannot open " + path);
    file.write(reinterpret_cast<const char*>(samples.data()),
               static_cast<std::streamsize>(samples.size() * sizeof(double)));
    if (!file) throw std::runtime_error("write_samples: write failed for " + path);
    return;
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw std::runtime_error("write_samples: cannot open " + path);
  for (double v : samples) file << fmt(v) << '\n';
  if (!file) throw std::runtime_error("write_samples: write failed for " + path);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers = std::min<std::size_t>(std::max(1u, hw), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) break;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hmsq
