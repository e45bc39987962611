#pragma once

#include <optional>
#include <string>

#include "edbl/model.hpp"
#include "edbl/rehearsal.hpp"

namespace edbl {

// Little-endian binary checkpoint container.
//
//   header:   magic "EDBL" (4 bytes), u32 version (= 1), u32 section count
//   section:  u32 name length, name bytes, u64 payload length, payload
//
// "model" payload:
//   u32 hidden layer count, u64 old_class_count,
//   per hidden layer: tensor W (u64 rows, u64 cols, f64 data row-major),
//                     tensor b (same encoding),
//   head tensor (same encoding).
//
// "exemplars" payload:
//   u8 policy (0 fixed-total, 1 per-class), u64 budget, u64 cap,
//   u64 class count, per class: i64 class id, u64 sample count,
//   per sample: i64 class id, u64 task id, tensor features.
//
// All floats are raw IEEE-754 doubles; a round trip is bit-exact.
void save_checkpoint(const std::string& path, const Model& model, const ExemplarStore* store);

struct Checkpoint {
    Model model;
    std::optional<ExemplarStore> store;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace edbl
