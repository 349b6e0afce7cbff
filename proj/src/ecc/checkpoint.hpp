#pragma once

#include <string>

#include "json.hpp"

#include "ecc/network.hpp"

namespace ecc {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

/// Layout:
///   line 1: "ECC-CHECKPOINT"
///   line 2: one-line JSON header {format_version, input{c,h,w}, layers[{kind,d,c,rh,rw,stride,padding,activation}],
///           n_out, meta}
///   payload: for each layer, d*c*rh*rw weights in (d, c, rh, rw) order then d biases,
///            all IEEE-754 binary64 little-endian.
void save_checkpoint(const std::string& path, const Network& net, const nlohmann::json& meta = nlohmann::json::object());

struct LoadedCheckpoint {
    Network net;
    nlohmann::json meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ecc
