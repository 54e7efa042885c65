// Model serialization.
//
// A model file is a KeyValueDocument with sections [physics], [states], [c],
// [mu], [sigma], [trans] and [init]. Numbers are written in shortest
// round-trip form, so save/load is lossless.
#pragma once

#include <string>

#include "co2occ/core.hpp"
#include "co2occ/keyvalue.hpp"

namespace co2occ {

void write_physics(KeyValueDocument& doc, const PhysicsConfig& physics);
/// Reads [physics]; missing keys fall back to PhysicsConfig defaults. Validated.
PhysicsConfig read_physics(const KeyValueDocument& doc);

KeyValueDocument model_to_document(const SwitchingARModel& model);
SwitchingARModel model_from_document(const KeyValueDocument& doc);

void save_model(const std::string& path, const SwitchingARModel& model);
SwitchingARModel load_model(const std::string& path);

}  // namespace co2occ
