#pragma once

// Serialization of traces and run metadata.
//
// Activation CSV: `step,time,level,observer,activation`, rows ordered by
// level (bottom-up), step, observer id. States CSV:
// `step,level,observer,dim,value`. Numbers use 17 significant digits.

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fluent/engine.hpp"

namespace fluent {

std::uint64_t fnv1a64(std::string_view bytes);

/// "%.17g" rendering used by every trace file.
std::string format_g17(double v);

void write_trace_csv(const TraceSet& t, std::ostream& out);
void write_states_csv(const TraceSet& t, std::ostream& out);

nlohmann::ordered_json trace_to_json(const TraceSet& t);
nlohmann::ordered_json states_to_json(const TraceSet& t);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);
/// Config echo, model hash and horizon. Wall-clock time is included only when
/// `with_timing` is set, so the default output is reproducible.
nlohmann::ordered_json metadata_to_json(const RunMetadata& m, bool with_timing = false);

std::string trace_csv(const TraceSet& t);
std::string states_csv(const TraceSet& t);

}  // namespace fluent
