#pragma once

#include <string>

#include "hmsq/baselines.hpp"
#include "hmsq/hmm.hpp"
#include "hmsq/scalable.hpp"
#include "hmsq/tracking.hpp"

namespace hmsq {

// JSON files, round-tripping every double bit-exactly. System files carry a
// "type" tag ("tracking", "dpcm", "fsq", "scalable"); untagged files load as
// tracking systems.

void save_model(const HmmModel& model, const std::string& path);
HmmModel load_model(const std::string& path);

void save_system(const CodecSystem& system, const std::string& path);
CodecSystem load_system(const std::string& path);

void save_dpcm(const DpcmCodec& codec, const std::string& path);
DpcmCodec load_dpcm(const std::string& path);

void save_fsq(const FsqCodec& codec, const std::string& path);
FsqCodec load_fsq(const std::string& path);

void save_scalable(const ScalableSystem& system, const std::string& path);
ScalableSystem load_scalable(const std::string& path);

// "tracking" / "dpcm" / "fsq" / "scalable"; throws on anything else.
std::string system_type(const std::string& path);

}  // namespace hmsq
