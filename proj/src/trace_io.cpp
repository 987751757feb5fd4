#include "fluent/trace_io.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <tuple>

namespace fluent {

namespace {

struct Row {
  std::int64_t step;
  const ObserverId* id;
  const Sample* sample;
};

// Rows of one level ordered by step, then observer id.
std::vector<Row> ordered_rows(const LevelTrace& level) {
  std::vector<Row> rows;
  for (const auto& [id, chronicle] : level.chronicles)
    for (const auto& s : chronicle) rows.push_back({s.step, &id, &s});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return std::tie(a.step, *a.id) < std::tie(b.step, *b.id); });
  return rows;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(const TraceSet& t, std::ostream& out) {
  out << "step,time,level,observer,activation\n";
  for (const auto& level : t.levels)
    for (const auto& r : ordered_rows(level))
      out << r.step << ',' << format_g17(r.sample->time) << ',' << level.level << ',' << *r.id << ','
          << format_g17(r.sample->activation) << '\n';
}

void write_states_csv(const TraceSet& t, std::ostream& out) {
  out << "step,level,observer,dim,value\n";
  for (const auto& level : t.levels)
    for (const auto& r : ordered_rows(level))
      for (std::size_t d = 0; d < r.sample->state.size(); ++d)
        out << r.step << ',' << level.level << ',' << *r.id << ',' << d << ',' << format_g17(r.sample->state[d])
            << '\n';
}

std::string trace_csv(const TraceSet& t) {
  std::ostringstream ss;
  write_trace_csv(t, ss);
  return ss.str();
}

std::string states_csv(const TraceSet& t) {
  std::ostringstream ss;
  write_states_csv(t, ss);
  return ss.str();
}

nlohmann::ordered_json trace_to_json(const TraceSet& t) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& level : t.levels)
    for (const auto& r : ordered_rows(level))
      rows.push_back({{"step", r.step},
                      {"time", r.sample->time},
                      {"level", level.level},
                      {"observer", *r.id},
                      {"activation", r.sample->activation}});
  return rows;
}

nlohmann::ordered_json states_to_json(const TraceSet& t) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& level : t.levels)
    for (const auto& r : ordered_rows(level))
      for (std::size_t d = 0; d < r.sample->state.size(); ++d)
        rows.push_back({{"step", r.step},
                        {"level", level.level},
                        {"observer", *r.id},
                        {"dim", d},
                        {"value", r.sample->state[d]}});
  return rows;
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["steps"] = cfg.steps ? nlohmann::ordered_json(*cfg.steps) : nlohmann::ordered_json(nullptr);
  j["duration"] = cfg.duration ? nlohmann::ordered_json(*cfg.duration) : nlohmann::ordered_json(nullptr);
  j["dt"] = cfg.dt ? nlohmann::ordered_json(*cfg.dt) : nlohmann::ordered_json(nullptr);
  j["seed"] = cfg.seed;
  j["record_states"] = cfg.record_states;
  j["standalone_level"] =
      cfg.standalone_level ? nlohmann::ordered_json(*cfg.standalone_level) : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json metadata_to_json(const RunMetadata& m, bool with_timing) {
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(m.model_hash));
  nlohmann::ordered_json j;
  j["model"] = m.model_name;
  j["model_hash"] = std::string("fnv1a64:") + hash;
  j["horizon_steps"] = m.horizon_steps;
  j["config"] = config_to_json(m.config);
  if (with_timing) j["wall_seconds"] = m.wall_seconds;
  return j;
}

}  // namespace fluent
