#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hfnd/nn.hpp"

namespace hfnd::nn {

// Binary parameter snapshot. Layout, all little-endian:
//   8-byte magic "HFNDPRM1", u32 entry count, then per entry:
//   u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64 in row order.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Mat*>>& entries);

// Strict restore: the file must contain exactly the requested names with
// matching shapes.
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Mat*>>& entries);

}  // namespace hfnd::nn
