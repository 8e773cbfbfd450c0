#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hmsq/serialize.hpp"

using namespace hmsq;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("hmsq_serialize_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator/(const char* name) const { return (dir / name).string(); }
};

HmmModel awkward_model() {
  // Deliberately non-round numbers so truncated printing would be caught.
  HmmModel m;
  m.n_states = 2;
  m.transition = {{0.9123456789012345, 0.0876543210987655},
                  {0.3333333333333333, 0.6666666666666667}};
  m.initial = {0.1, 0.9};
  m.emissions = GaussianEmissions{{-1.4999999999999998, 1.0000000000000002e-3},
                                  {1.0 / 3.0, 2.0000000000000004}};
  m.validate();
  return m;
}

CodecSystem trained() {
  const HmmModel model = make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.1);
  TrainOptions opts;
  opts.train_len = 4000;
  opts.em_rounds = 2;
  return train_system(model, 3, 2, 5, opts);
}

}  // namespace

TEST_CASE("model round-trips bit-exactly") {
  TempDir td;
  const HmmModel m = awkward_model();
  save_model(m, td / "model.json");
  const HmmModel r = load_model(td / "model.json");
  CHECK(r.n_states == m.n_states);
  CHECK(r.transition == m.transition);
  CHECK(r.initial == m.initial);
  CHECK(r.gaussian().means == m.gaussian().means);
  CHECK(r.gaussian().vars == m.gaussian().vars);
}

TEST_CASE("tracking system round-trips bit-exactly") {
  TempDir td;
  const CodecSystem s = trained();
  save_system(s, td / "sys.json");
  CHECK(system_type(td / "sys.json") == "tracking");
  const CodecSystem r = load_system(td / "sys.json");
  r.validate();
  CHECK(r.rate_bits == s.rate_bits);
  CHECK(r.n_classes == s.n_classes);
  CHECK(r.online_lloyd_iters == s.online_lloyd_iters);
  CHECK(r.model.transition == s.model.transition);
  REQUIRE(r.class_reps.size() == s.class_reps.size());
  for (std::size_t i = 0; i < s.class_reps.size(); ++i)
    CHECK(r.class_reps[i].probs == s.class_reps[i].probs);
  REQUIRE(r.class_codebooks.size() == s.class_codebooks.size());
  for (std::size_t i = 0; i < s.class_codebooks.size(); ++i) {
    CHECK(r.class_codebooks[i].reps == s.class_codebooks[i].reps);
    CHECK(r.class_codebooks[i].thresholds == s.class_codebooks[i].thresholds);
  }
  CHECK(r.initial_codebook.reps == s.initial_codebook.reps);
  CHECK(r.initial_codebook.thresholds == s.initial_codebook.thresholds);
}

TEST_CASE("dpcm and fsq codecs round-trip bit-exactly") {
  TempDir td;
  const auto obs =
      sample(make_two_state_source(-1.5, 1.5, 1.0, 1.0, 0.1), 20000, 3).observations;

  const DpcmCodec d = dpcm_train(obs, 4);
  save_dpcm(d, td / "dpcm.json");
  CHECK(system_type(td / "dpcm.json") == "dpcm");
  const DpcmCodec rd = load_dpcm(td / "dpcm.json");
  CHECK(rd.predictor == d.predictor);
  CHECK(rd.init_value == d.init_value);
  CHECK(rd.rate_bits == d.rate_bits);
  CHECK(rd.residual_codebook.reps == d.residual_codebook.reps);
  CHECK(rd.residual_codebook.thresholds == d.residual_codebook.thresholds);

  const FsqCodec f = fsq_train(obs, 3, 3);
  save_fsq(f, td / "fsq.json");
  CHECK(system_type(td / "fsq.json") == "fsq");
  const FsqCodec rf = load_fsq(td / "fsq.json");
  CHECK(rf.rate_bits == f.rate_bits);
  CHECK(rf.train_mean == f.train_mean);
  CHECK(rf.next_state == f.next_state);
  REQUIRE(rf.state_codebooks.size() == f.state_codebooks.size());
  for (std::size_t i = 0; i < f.state_codebooks.size(); ++i) {
    CHECK(rf.state_codebooks[i].reps == f.state_codebooks[i].reps);
    CHECK(rf.state_codebooks[i].thresholds == f.state_codebooks[i].thresholds);
  }
}

TEST_CASE("scalable system round-trips bit-exactly") {
  TempDir td;
  ScalableSystem s;
  s.base = trained();
  s.enh_rate_bits = 2;
  s.delay_window = 3;
  s.enh_online_lloyd_iters = 2;
  s.clip_sigma = 5.5;
  save_scalable(s, td / "sc.json");
  CHECK(system_type(td / "sc.json") == "scalable");
  const ScalableSystem r = load_scalable(td / "sc.json");
  r.validate();
  CHECK(r.enh_rate_bits == 2);
  CHECK(r.delay_window == 3);
  CHECK(r.enh_online_lloyd_iters == 2);
  CHECK(r.clip_sigma == 5.5);
  CHECK(r.base.initial_codebook.reps == s.base.initial_codebook.reps);
}

TEST_CASE("loading behaves sensibly on bad input") {
  TempDir td;
  SUBCASE("missing file") { CHECK_THROWS(load_model(td / "absent.json")); }
  SUBCASE("malformed JSON") {
    std::ofstream(td / "broken.json") << "{ not json";
    CHECK_THROWS(load_model(td / "broken.json"));
    CHECK_THROWS(system_type(td / "broken.json"));
  }
  SUBCASE("wrong type tag") {
    const CodecSystem s = trained();
    save_system(s, td / "sys.json");
    CHECK_THROWS(load_dpcm(td / "sys.json"));
    CHECK_THROWS(load_fsq(td / "sys.json"));
    CHECK_THROWS(load_scalable(td / "sys.json"));
  }
  SUBCASE("unknown type tag") {
    std::ofstream(td / "odd.json") << R"({"type": "mystery"})";
    CHECK_THROWS(system_type(td / "odd.json"));
  }
  SUBCASE("model with a broken transition row is rejected on load") {
    HmmModel m = awkward_model();
    save_model(m, td / "model.json");
    // Corrupt the stored row sum by editing the text.
    std::ifstream in(td / "model.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const std::string needle = "0.9123456789012345";
    const auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, needle.size(), "0.95555");
    std::ofstream(td / "model.json") << text;
    CHECK_THROWS(load_model(td / "model.json"));
  }
}
