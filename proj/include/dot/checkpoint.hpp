#pragma once

#include <string>
#include <utility>

#include "dot/params.hpp"

namespace dot {

/// Binary checkpoint: magic "DOTCKPT1", a config echo (JSON string), then a
/// named tensor table. Tensor payloads are little-endian 32-bit floats,
/// names length-prefixed UTF-8. Saving and loading round-trips every tensor
/// bitwise.
void save_checkpoint(const ParamStore& params, const std::string& config_json, const std::string& path);

std::pair<ParamStore, std::string> load_checkpoint(const std::string& path);

/// Copies loaded tensors into a freshly constructed model store, verifying
/// that every expected tensor is present with the expected shape. Throws a
/// descriptive error naming the offending tensor.
void load_into(ParamStore& dst, const ParamStore& src);

}  // namespace dot
