#pragma once

#include <string>
#include <vector>

#include "rblb/tensor.hpp"

namespace rblb {

/// Loads an 8-bit RGB PNG as a 1x3xHxW tensor with v/255 values.
Tensor load_png(const std::string& path);

/// Saves a 1x3xHxW tensor in [0, 1]; bytes are rounded half away from zero.
void save_png(const std::string& path, const Tensor& image);

/// Lexicographically sorted *.png paths directly inside dir.
std::vector<std::string> list_pngs(const std::string& dir);

}  // namespace rblb
