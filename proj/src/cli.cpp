#include "fluent/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <iomanip>
#include <sstream>

#include "fluent/analysis.hpp"
#include "fluent/dsl.hpp"
#include "fluent/engine.hpp"
#include "fluent/error.hpp"
#include "fluent/models.hpp"
#include "fluent/symbolic.hpp"
#include "fluent/trace_io.hpp"

namespace fluent::cli {

namespace {

using json = nlohmann::ordered_json;

// A parse error prefixed with the file it came from.
class SourceError : public Error {
 public:
  using Error::Error;
};

struct HorizonFlags {
  std::optional<std::int64_t> steps;
  std::optional<double> duration;
  std::optional<double> dt;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    auto* s = cmd->add_option("--steps", steps, "Horizon in steps of the driving level");
    auto* d = cmd->add_option("--duration", duration, "Horizon in time units of the driving level");
    s->excludes(d);
    cmd->add_option("--dt", dt, "Override the step of continuous levels")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Seed of the noise generators")->capture_default_str();
  }

  RunConfig config() const {
    RunConfig cfg;
    cfg.steps = steps;
    cfg.duration = duration;
    cfg.dt = dt;
    cfg.seed = seed;
    return cfg;
  }
};

std::string plural(std::size_t n, const std::string& word) {
  return std::to_string(n) + " " + word + (n == 1 ? "" : "s");
}

SourceModel load(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_source(text);
  } catch (const ParseError& e) {
    throw SourceError(path + ":" + e.what());
  }
}

std::string located(const std::string& path, const Violation& v) {
  return path + ":" + format_violation(v);
}

json violation_json(const Violation& v) {
  json j;
  j["code"] = to_string(v.code);
  j["level"] = v.level;
  j["subjects"] = v.subjects;
  j["message"] = v.message;
  if (v.span)
    j["span"] = {{"line", v.span->line}, {"column", v.span->column}};
  else
    j["span"] = nullptr;
  return j;
}

// Prints violations; returns true when there were none.
bool report_violations(const std::string& path, const std::vector<Violation>& vs, std::ostream& os) {
  for (const auto& v : vs) os << located(path, v) << "\n";
  return vs.empty();
}

std::map<ObserverId, SignalSpec> parse_inputs(const std::vector<std::string>& specs) {
  std::map<ObserverId, SignalSpec> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--input", "expected id=value, got '" + s + "'");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(s.substr(eq + 1), &used);
      if (used != s.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw CLI::ValidationError("--input", "value of '" + s.substr(0, eq) + "' is not a number");
    }
    out[s.substr(0, eq)] = signal::Const{v};
  }
  return out;
}

const TermGrammar& pick_grammar(const SourceModel& src, const std::string& name, const std::string& path) {
  if (src.grammars.empty()) throw InvalidGrammar(path + ": no grammar block");
  if (name.empty()) return src.grammars.front();
  for (const auto& g : src.grammars)
    if (g.name == name) return g;
  throw InvalidGrammar(path + ": no grammar named '" + name + "'");
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_file_atomic(path, text);
}

// --- subcommands -----------------------------------------------------------

int cmd_validate(const std::string& path, bool as_json, std::ostream& out) {
  const SourceModel src = load(path);
  const auto vs = validate(src);
  if (as_json) {
    json j;
    j["model"] = path;
    j["violations"] = json::array();
    for (const auto& v : vs) j["violations"].push_back(violation_json(v));
    j["count"] = vs.size();
    out << j.dump(2) << "\n";
  } else {
    report_violations(path, vs, out);
    out << plural(vs.size(), "violation") << "\n";
  }
  return vs.empty() ? kOk : kValidationError;
}

struct RunFlags {
  std::string path;
  HorizonFlags horizon;
  std::string trace, states, meta, level;
  std::vector<std::string> inputs;
  bool as_json = false;
};

int cmd_run(const RunFlags& f, std::ostream& out, std::ostream& err) {
  const SourceModel src = load(f.path);
  const auto vs = validate(src);
  if (!report_violations(f.path, vs, err)) {
    err << plural(vs.size(), "violation") << "\n";
    return kValidationError;
  }
  RunConfig cfg = f.horizon.config();
  cfg.record_states = !f.states.empty();
  if (!f.level.empty()) cfg.standalone_level = f.level;
  const TraceSet t = run(src.hierarchy, parse_inputs(f.inputs), cfg);

  const std::string trace_text = f.as_json ? trace_to_json(t).dump(1) + "\n" : trace_csv(t);
  emit(trace_text, f.trace, out);
  if (!f.states.empty())
    write_file_atomic(f.states, f.as_json ? states_to_json(t).dump(1) + "\n" : states_csv(t));
  if (!f.meta.empty()) write_file_atomic(f.meta, metadata_to_json(t.meta, true).dump(2) + "\n");
  return kOk;
}

struct CommuteFlags {
  std::string path;
  HorizonFlags horizon;
  std::string level;
  std::optional<double> tol;
  std::optional<std::int64_t> settle;
  bool as_json = false;
};

int cmd_commute(const CommuteFlags& f, std::ostream& out, std::ostream& err) {
  const SourceModel src = load(f.path);
  const Hierarchy& h = src.hierarchy;
  const auto vs = validate(src);
  if (!report_violations(f.path, vs, err)) {
    err << plural(vs.size(), "violation") << "\n";
    return kValidationError;
  }
  if (h.levels.empty()) throw NoComparableObservers("the model has no levels");
  const std::string upper = f.level.empty() ? h.levels.back().name : f.level;
  RunConfig cfg = f.horizon.config();
  if (!cfg.steps && !cfg.duration) {
    // Enough bottom steps to leave a comparison window after the settle prefix.
    std::int64_t scale = 1;
    const std::size_t pos = h.level_position(upper);
    for (std::size_t m = 1; m <= pos; ++m) scale *= h.ratio(h.levels[m].name);
    const std::int64_t settle = f.settle.value_or(default_settle(h, upper));
    cfg.steps = std::max<std::int64_t>(RunConfig::default_steps, (settle + 10) * scale);
  }
  const CommuteReport r = check_commute(h, upper, cfg, f.tol, f.settle);

  if (f.as_json) {
    json j;
    j["level"] = r.upper;
    j["pass"] = r.pass;
    j["tolerance"] = r.tolerance;
    j["settle"] = r.settle;
    j["max_discrepancy"] = r.max_discrepancy;
    j["observers"] = json::array();
    for (const auto& o : r.observers)
      j["observers"].push_back({{"observer", o.id},
                                {"max_abs", o.max_abs},
                                {"mean_abs", o.mean_abs},
                                {"samples", o.samples},
                                {"worst_step", o.worst_step},
                                {"pass", o.pass}});
    out << j.dump(2) << "\n";
  } else {
    std::size_t w = std::string("observer").size();
    for (const auto& o : r.observers) w = std::max(w, o.id.size());
    out << "level " << r.upper << ": " << (r.pass ? "PASS" : "FAIL") << " (tolerance " << format_number(r.tolerance)
        << ", settle " << r.settle << ", max discrepancy " << format_number(r.max_discrepancy) << ")\n";
    out << std::left << std::setw(static_cast<int>(w) + 2) << "observer" << std::setw(14) << "max_abs"
        << std::setw(14) << "mean_abs" << std::setw(9) << "samples"
        << "status\n";
    for (const auto& o : r.observers)
      out << std::left << std::setw(static_cast<int>(w) + 2) << o.id << std::setw(14) << format_number(o.max_abs)
          << std::setw(14) << format_number(o.mean_abs) << std::setw(9) << o.samples << (o.pass ? "ok" : "FAIL")
          << "\n";
  }
  return r.pass ? kOk : kCommuteFailure;
}

int cmd_couple(const std::string& path, const std::string& level_name, bool transitive, bool as_json,
               std::ostream& out) {
  const SourceModel src = load(path);
  const Hierarchy& h = src.hierarchy;
  if (h.levels.empty()) throw UnknownObserver("the model has no levels");
  const std::string name = level_name.empty() ? h.levels.front().name : level_name;
  const LevelModel* level = h.find_level(name);
  if (!level) throw UnknownObserver("no level named '" + name + "'");
  const CouplingReport r = coupling(*level, transitive);
  if (as_json) {
    json j;
    j["level"] = name;
    j["pairs"] = json::array();
    for (const auto& p : r.pairs)
      j["pairs"].push_back({{"a", p.a}, {"b", p.b}, {"kind", to_string(p.kind)}, {"witness", p.witness}});
    if (r.groups) j["groups"] = *r.groups;
    out << j.dump(2) << "\n";
    return kOk;
  }
  for (const auto& p : r.pairs) out << p.a << " " << p.b << " " << to_string(p.kind) << " " << p.witness << "\n";
  out << plural(r.pairs.size(), "coupled pair") << "\n";
  if (r.groups) {
    for (const auto& g : *r.groups) {
      out << "group:";
      for (const auto& id : g) out << " " << id;
      out << "\n";
    }
  }
  return kOk;
}

int cmd_encode(const std::string& grammar_path, const std::string& name, const std::string& term,
               const std::string& out_path, std::ostream& out) {
  const SourceModel src = load(grammar_path);
  const TermGrammar& g = pick_grammar(src, name, grammar_path);
  const OneHotAssignment a = term.empty() ? undefined_assignment(g) : encode_term(g, term);
  json j(a);
  emit(j.dump(2) + "\n", out_path, out);
  return kOk;
}

int cmd_decode(const std::string& grammar_path, const std::string& name, const std::string& input,
               std::ostream& out) {
  const SourceModel src = load(grammar_path);
  const TermGrammar& g = pick_grammar(src, name, grammar_path);
  const std::string text = read_file(input);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(input + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw IoError(input + ": expected a JSON object of observer activations");
  OneHotAssignment a;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw IoError(input + ": activation of '" + k + "' is not a number");
    a[k] = v.get<double>();
  }
  const auto term = decode_term(g, a);
  out << (term ? *term : "Undefined") << "\n";
  return kOk;
}

int cmd_fmt(const std::string& path, bool write, std::ostream& out) {
  const SourceModel src = load(path);
  const std::string text = render_source(src.hierarchy, src.grammars);
  if (write)
    write_file_atomic(path, text);
  else
    out << text;
  return kOk;
}

int cmd_example(const std::string& name, const std::string& out_path, bool list, std::ostream& out) {
  if (list || name.empty()) {
    for (const auto& n : example_names()) out << n << "\n";
    return kOk;
  }
  const auto names = example_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw IoError("unknown example '" + name + "'");
  emit(example_source(name), out_path, out);
  return kOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator and checker for observer hierarchies", "fluent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fluent 1.0.0");

  std::string path;
  bool as_json = false;

  auto* validate_cmd = app.add_subcommand("validate", "Check a model for structural violations");
  validate_cmd->add_option("model", path, "Model file (.fc)")->required();
  validate_cmd->add_flag("--json", as_json, "Report as JSON");

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Execute a model and write its trace");
  run_cmd->add_option("model", run_flags.path, "Model file (.fc)")->required();
  run_flags.horizon.attach(run_cmd);
  run_cmd->add_option("--trace", run_flags.trace, "Trace file (default: standard output)");
  run_cmd->add_option("--states", run_flags.states, "Also record states into this file");
  run_cmd->add_option("--meta", run_flags.meta, "Write run metadata JSON to this file");
  run_cmd->add_option("--level", run_flags.level, "Run only this level, standalone");
  run_cmd->add_option("--input", run_flags.inputs, "Constant input signal id=value (repeatable)");
  run_cmd->add_flag("--json", run_flags.as_json, "Write traces as JSON instead of CSV");

  CommuteFlags commute_flags;
  auto* commute_cmd = app.add_subcommand("check-commute", "Compare grounding and within-level paths");
  commute_cmd->add_option("model", commute_flags.path, "Model file (.fc)")->required();
  commute_flags.horizon.attach(commute_cmd);
  commute_cmd->add_option("--level", commute_flags.level, "Upper level to check (default: top level)");
  commute_cmd->add_option("--tol", commute_flags.tol, "Tolerance (default: 0 if all levels are discrete, else 1e-6)")
      ->check(CLI::NonNegativeNumber);
  commute_cmd->add_option("--settle", commute_flags.settle, "Leading upper steps excluded from the comparison")
      ->check(CLI::NonNegativeNumber);
  commute_cmd->add_flag("--json", commute_flags.as_json, "Report as JSON");

  std::string couple_level;
  bool transitive = false;
  auto* couple_cmd = app.add_subcommand("couple", "List coupled observer pairs of a level");
  couple_cmd->add_option("model", path, "Model file (.fc)")->required();
  couple_cmd->add_option("--level", couple_level, "Level (default: bottom level)");
  couple_cmd->add_flag("--transitive", transitive, "Also report the transitive coupling groups");
  couple_cmd->add_flag("--json", as_json, "Report as JSON");

  std::string grammar_path, grammar_name, term, out_path;
  auto* encode_cmd = app.add_subcommand("encode", "One-hot encode a term");
  encode_cmd->add_option("--grammar", grammar_path, "File with grammar blocks")->required();
  encode_cmd->add_option("--name", grammar_name, "Grammar name (default: first in file)");
  encode_cmd->add_option("--term", term, "Term to encode (omit for the undefined value)");
  encode_cmd->add_option("--out", out_path, "Output file (default: standard output)");

  std::string assignment_path;
  auto* decode_cmd = app.add_subcommand("decode", "Decode a one-hot assignment");
  decode_cmd->add_option("--grammar", grammar_path, "File with grammar blocks")->required();
  decode_cmd->add_option("--name", grammar_name, "Grammar name (default: first in file)");
  decode_cmd->add_option("assignment", assignment_path, "JSON object of observer activations")->required();

  bool write = false;
  auto* fmt_cmd = app.add_subcommand("fmt", "Print a model in canonical form");
  fmt_cmd->add_option("model", path, "Model file (.fc)")->required();
  fmt_cmd->add_flag("--write", write, "Rewrite the file in place");

  std::string example_name;
  bool list = false;
  auto* example_cmd = app.add_subcommand("example", "Print a shipped reference model");
  example_cmd->add_option("name", example_name, "adder, arith, clock, governor or multiplier");
  example_cmd->add_option("--out", out_path, "Output file (default: standard output)");
  example_cmd->add_flag("--list", list, "List the available examples");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  if (validate_cmd->parsed()) return cmd_validate(path, as_json, out);
  if (run_cmd->parsed()) return cmd_run(run_flags, out, err);
  if (commute_cmd->parsed()) return cmd_commute(commute_flags, out, err);
  if (couple_cmd->parsed()) return cmd_couple(path, couple_level, transitive, as_json, out);
  if (encode_cmd->parsed()) return cmd_encode(grammar_path, grammar_name, term, out_path, out);
  if (decode_cmd->parsed()) return cmd_decode(grammar_path, grammar_name, assignment_path, out);
  if (fmt_cmd->parsed()) return cmd_fmt(path, write, out);
  if (example_cmd->parsed()) return cmd_example(example_name, out_path, list, out);
  return kInputError;
}

}  // namespace

int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto fail = [&](int code, const std::string& kind, const std::string& msg) {
    err << "error: " << kind << ": " << msg << "\n";
    return code;
  };
  try {
    return dispatch(args, out, err);
  } catch (const CLI::Error& e) {
    return fail(kInputError, "usage", e.what());
  } catch (const SourceError& e) {
    return fail(kInputError, "syntax", e.what());
  } catch (const ParseError& e) {
    return fail(kInputError, "syntax", e.what());
  } catch (const IoError& e) {
    return fail(kInputError, "io", e.what());
  } catch (const TermParseError& e) {
    return fail(kInputError, "term", e.what());
  } catch (const CycleError& e) {
    return fail(kValidationError, "cycle", e.what());
  } catch (const ValidationError& e) {
    return fail(kValidationError, "validation", e.what());
  } catch (const OneHotViolation& e) {
    return fail(kValidationError, "one-hot", e.what());
  } catch (const EventCycleError& e) {
    return fail(kRuntimeError, "event cycle", e.what());
  } catch (const RuntimeFault& e) {
    return fail(kRuntimeError, "runtime", e.what());
  } catch (const std::exception& e) {
    return fail(kRuntimeError, "internal", e.what());
  }
}

}  // namespace fluent::cli
