#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rblb/models.hpp"
#include "rblb/param_store.hpp"

namespace rblb {

enum class CheckpointErrorCode { CorruptFile, MagicMismatch, SpecHashMismatch };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

/// On-disk layout: magic "RBLB1", u32 length-prefixed JSON metadata, then a
/// u32 array count followed by named little-endian float32 arrays, each with
/// a name, 4-int shape, and byte-length header. Parameter stores serialize
/// under "params/<store>/<path>"; any other array name round-trips verbatim
/// (optimizer moments use "opt/...").
struct Checkpoint {
  nlohmann::json metadata;
  std::map<std::string, ParamStore> stores;
  std::map<std::string, std::pair<Shape, std::vector<float>>> arrays;
};

/// Requires finite parameter values. Writing is deterministic: identical
/// checkpoints produce identical bytes.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Loaded parameters do not require gradients; callers opt back in.
Checkpoint load_checkpoint(const std::string& path);

/// Throws SpecHashMismatch unless the named store was created from an
/// architecture with the same hash as `expected`.
const ParamStore& checked_store(const Checkpoint& ckpt, const std::string& name,
                                const NetworkSpec& expected);

}  // namespace rblb
