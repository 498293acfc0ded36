#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ppfl/numkit.hpp"

namespace ppfl::snapshot {

// Everything an offline attacker replays a round from: the broadcast
// parameters, the client upload, the step size, and the client batch.
struct RoundSnapshot {
  numkit::ParamVector w_prev;
  numkit::ParamVector w_upload;
  double eta = 0.0;
  numkit::Batch batch;
  std::vector<std::pair<std::string, std::string>> meta;
};

// Binary container: magic "PFSNAP1\0", version u32, length-prefixed named
// float64 arrays, then a key-value metadata block.  All integers and doubles
// are little-endian; load inverts save bit-exactly.
void save_round(const std::string& path, const RoundSnapshot& snap);
RoundSnapshot load_round(const std::string& path);

}  // namespace ppfl::snapshot
