// Command-line driver: source generation, model fitting, codec training,
// file <-> bitstream conversion, and the reproduction sweeps.
//
// Exit codes: 0 success, 2 bad flags or config, 1 runtime failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmsq/bitstream.hpp"
#include "hmsq/experiment.hpp"
#include "hmsq/hmm.hpp"
#include "hmsq/rng.hpp"
#include "hmsq/scalable.hpp"
#include "hmsq/serialize.hpp"
#include "hmsq/tracking.hpp"

namespace {

using namespace hmsq;

struct GlobalArgs {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load_config(const GlobalArgs& g) {
  ExperimentConfig config =
      g.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(g.config_path);
  if (g.seed) config.seeds = {*g.seed};
  config.validate();
  return config;
}

std::uint64_t base_seed(const GlobalArgs& g, const ExperimentConfig& config) {
  return g.seed ? *g.seed : config.seeds.front();
}

std::string require_out(const GlobalArgs& g, const char* what) {
  if (g.out_path.empty())
    throw std::invalid_argument(std::string("--out is required for ") + what);
  return g.out_path;
}

std::uint32_t checked_u32(std::size_t n, const char* what) {
  if (n > 0xffffffffull)
    throw std::invalid_argument(std::string(what) + " exceeds the 32-bit sample count");
  return static_cast<std::uint32_t>(n);
}

void run_sweep(const GlobalArgs& g, const std::string& name,
               ExperimentResult (*runner)(const ExperimentConfig&),
               const std::string& x_field) {
  const ExperimentConfig config = load_config(g);
  const std::string out = g.out_path.empty() ? name + ".csv" : g.out_path;
  const ExperimentResult result = runner(config);
  write_csv(result, out);
  write_meta(result, out);
  std::string prefix = out;
  if (prefix.size() > 4 && prefix.compare(prefix.size() - 4, 4, ".csv") == 0)
    prefix.resize(prefix.size() - 4);
  write_plot_data(result, prefix, x_field);
  std::cout << "wrote " << out << " (" << result.rows.size() << " rows)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantization of hidden Markov sources: codecs, baselines, bounds, sweeps"};
  app.require_subcommand(1);

  GlobalArgs g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed list");
  app.add_option("--out", g.out_path, "Output path");

  // gen
  auto* gen = app.add_subcommand("gen", "Sample the configured source to a file");
  gen->fallthrough();
  std::size_t gen_len = 0;
  gen->add_option("--len", gen_len, "Sequence length (default: config eval_len)");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a Gaussian-emission model to samples (EM)");
  fit->fallthrough();
  std::string fit_in;
  int fit_states = 2, fit_iters = 100;
  fit->add_option("--in", fit_in, "Sample file")->required();
  fit->add_option("--states", fit_states, "Number of states")->capture_default_str();
  fit->add_option("--iters", fit_iters, "Max EM iterations")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a codec system");
  train->fallthrough();
  std::string train_model, train_in;
  int train_rate = 4, train_classes = 0, train_enh_rate = 0, train_delay = 0;
  double train_p_loss = 0.0;
  train->add_option("--model", train_model, "Source model file (default: config source)");
  train->add_option("--in", train_in, "Training samples (default: sampled from the model)");
  train->add_option("--rate", train_rate, "Base rate in bits")->capture_default_str();
  train->add_option("--classes", train_classes, "Belief classes (default: config)");
  train->add_option("--enh-rate", train_enh_rate,
                    "Enhancement rate; emits a two-layer system when set");
  train->add_option("--delay", train_delay, "Enhancement delay window L")->capture_default_str();
  train->add_option("--p-loss", train_p_loss, "Design-time packet loss rate")->capture_default_str();

  // encode
  auto* enc = app.add_subcommand("encode", "Encode a sample file to a bitstream");
  enc->fallthrough();
  std::string enc_system, enc_in, enc_enh_out;
  std::uint32_t enc_stream_id = 1;
  enc->add_option("--system", enc_system, "Trained system file")->required();
  enc->add_option("--in", enc_in, "Sample file")->required();
  enc->add_option("--enh-out", enc_enh_out, "Enhancement bitstream path (two-layer systems)");
  enc->add_option("--stream-id", enc_stream_id, "Pairing id stored in two-layer streams")->capture_default_str();

  // decode
  auto* dec = app.add_subcommand("decode", "Decode a bitstream to a sample file");
  dec->fallthrough();
  std::string dec_system, dec_in, dec_base;
  dec->add_option("--system", dec_system, "Trained system file")->required();
  dec->add_option("--in", dec_in, "Bitstream")->required();
  dec->add_option("--base", dec_base, "Base bitstream (required for enhancement streams)");

  // sweeps
  auto* rd = app.add_subcommand("rd", "Rate-distortion sweep (codecs, baselines, bounds)");
  auto* trans = app.add_subcommand("trans", "Transition-probability sweep");
  auto* loss = app.add_subcommand("loss", "Packet-loss grid");
  auto* scal = app.add_subcommand("scalable", "Two-layer sweep over enhancement rates");
  auto* delayed = app.add_subcommand("delayed", "Delayed-enhancement sweep");
  auto* bounds = app.add_subcommand("bounds", "Distortion bounds across the rate list");
  for (auto* sub : {rd, trans, loss, scal, delayed, bounds}) sub->fallthrough();

  try {
    app.parse(argc, argv);
    if (seed_opt->count() > 0) g.seed = seed_value;

    if (gen->parsed()) {
      const ExperimentConfig config = load_config(g);
      const std::string out = require_out(g, "gen");
      const std::size_t len = gen_len > 0 ? gen_len : config.eval_len;
      const HmmModel model = config.source_model();
      write_samples(sample(model, len, base_seed(g, config)).observations, out);
      std::cout << "wrote " << len << " samples to " << out << "\n";
    } else if (fit->parsed()) {
      const ExperimentConfig config = load_config(g);
      const std::string out = require_out(g, "fit");
      const std::vector<double> obs = ingest_samples(fit_in);
      FitOptions opts;
      opts.max_iters = fit_iters;
      const FitResult result = fit_gaussian_traced(obs, fit_states, base_seed(g, config), opts);
      save_model(result.model, out);
      std::cout << "fit " << fit_states << " states in " << result.log_likelihoods.size()
                << " iterations, final log-likelihood "
                << result.log_likelihoods.back() << "; wrote " << out << "\n";
    } else if (train->parsed()) {
      const ExperimentConfig config = load_config(g);
      const std::string out = require_out(g, "train");
      const HmmModel model =
          train_model.empty() ? config.source_model() : load_model(train_model);
      const int classes = train_classes > 0 ? train_classes : config.n_classes;
      const std::uint64_t seed = base_seed(g, config);
      const std::vector<double> obs =
          train_in.empty()
              ? sample(model, config.train_len, Rng::mix(seed, 0x747261696eull)).observations
              : ingest_samples(train_in);
      TrainOptions topts;
      topts.p_loss = train_p_loss;
      TrainingLog log;
      const CodecSystem system =
          train_system(model, train_rate, classes, obs, seed, topts, &log);
      if (train_enh_rate > 0) {
        ScalableSystem scalable;
        scalable.base = system;
        scalable.enh_rate_bits = train_enh_rate;
        scalable.delay_window = train_delay;
        scalable.validate();
        save_scalable(scalable, out);
      } else {
        save_system(system, out);
      }
      std::cout << "trained " << log.round_distortion_db.size() << " rounds, "
                << log.final_classes << " classes; wrote " << out << "\n";
      for (const std::string& w : log.warnings) std::cerr << "warning: " << w << "\n";
    } else if (enc->parsed()) {
      const std::string out = require_out(g, "encode");
      const std::vector<double> obs = ingest_samples(enc_in);
      const std::string type = system_type(enc_system);
      if (type == "tracking") {
        const CodecSystem system = load_system(enc_system);
        StreamHeader header;
        header.codec_id = CodecId::kTracking;
        header.rate_bits = system.rate_bits;
        header.num_samples = checked_u32(obs.size(), "input");
        write_bytes(out, encode_stream(header, encode(obs, system)));
      } else if (type == "scalable") {
        if (enc_enh_out.empty())
          throw std::invalid_argument("--enh-out is required for two-layer systems");
        const ScalableSystem system = load_scalable(enc_system);
        const ScalableStreams streams = encode_scalable(obs, system);
        StreamHeader base;
        base.codec_id = CodecId::kScalableBase;
        base.rate_bits = system.base.rate_bits;
        base.num_samples = checked_u32(obs.size(), "input");
        base.stream_id = enc_stream_id;
        StreamHeader enh = base;
        enh.codec_id = CodecId::kScalableEnh;
        enh.rate_bits = system.enh_rate_bits;
        enh.enhancement = EnhancementInfo{system.delay_window, system.base.rate_bits};
        write_bytes(out, encode_stream(base, streams.base_indices));
        write_bytes(enc_enh_out, encode_stream(enh, streams.enh_indices));
      } else {
        throw std::invalid_argument("encode supports tracking and two-layer systems, not " +
                                    type);
      }
      std::cout << "encoded " << obs.size() << " samples\n";
    } else if (dec->parsed()) {
      const std::string out = require_out(g, "decode");
      const DecodedStream stream = decode_stream(read_bytes(dec_in));
      std::vector<double> recon;
      switch (stream.header.codec_id) {
        case CodecId::kTracking: {
          const CodecSystem system = load_system(dec_system);
          if (stream.header.rate_bits != system.rate_bits)
            throw std::runtime_error("stream rate does not match the system");
          recon = decode(stream.indices, system);
          break;
        }
        case CodecId::kScalableBase: {
          const ScalableSystem system = load_scalable(dec_system);
          if (stream.header.rate_bits != system.base.rate_bits)
            throw std::runtime_error("stream rate does not match the system");
          recon = decode_base(stream.indices, system);
          break;
        }
        case CodecId::kScalableEnh: {
          if (dec_base.empty())
            throw std::invalid_argument("--base is required for enhancement streams");
          const ScalableSystem system = load_scalable(dec_system);
          const DecodedStream base = decode_stream(read_bytes(dec_base));
          if (base.header.codec_id != CodecId::kScalableBase)
            throw std::runtime_error("--base is not a base-layer stream");
          if (base.header.stream_id != stream.header.stream_id)
            throw std::runtime_error("base/enhancement pairing ids differ");
          if (stream.header.rate_bits != system.enh_rate_bits ||
              base.header.rate_bits != system.base.rate_bits)
            throw std::runtime_error("stream rates do not match the system");
          recon = decode_enh(base.indices, stream.indices, system);
          break;
        }
        default:
          throw std::runtime_error("no decoder for this stream type");
      }
      write_samples(recon, out);
      std::cout << "decoded " << recon.size() << " samples to " << out << "\n";
    } else if (rd->parsed()) {
      run_sweep(g, "rd", run_rd_sweep, "rate_bits");
    } else if (trans->parsed()) {
      run_sweep(g, "trans", run_transition_sweep, "transition_p");
    } else if (loss->parsed()) {
      run_sweep(g, "loss", run_loss_sweep, "loss_rate");
    } else if (scal->parsed()) {
      run_sweep(g, "scalable", run_scalable_sweep, "enh_rate_bits");
    } else if (delayed->parsed()) {
      run_sweep(g, "delayed", run_delayed_sweep, "delay_window");
    } else if (bounds->parsed()) {
      run_sweep(g, "bounds", run_bounds_sweep, "rate_bits");
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
