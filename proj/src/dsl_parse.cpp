#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fluent/dsl.hpp"
#include "fluent/error.hpp"
#include "fluent/operators.hpp"

namespace fluent {

namespace {

bool is_id_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

enum class Tok { word, number, string, punct, end };

struct Token {
  Tok type = Tok::end;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = {line_, col_};
      if (at_end()) {
        t.type = Tok::end;
        out.push_back(t);
        return out;
      }
      char c = peek();
      if (c == '"') {
        t.type = Tok::string;
        t.text = lex_string();
      } else if (c == '-' && peek(1) == '>') {
        t.type = Tok::punct;
        t.text = "->";
        advance(2);
      } else if (c == '<' && peek(1) == '-') {
        t.type = Tok::punct;
        t.text = "<-";
        advance(2);
      } else if (starts_number()) {
        lex_number_or_word(t);
      } else if (is_id_char(c)) {
        t.type = Tok::word;
        while (!at_end() && is_id_char(peek())) t.text += take();
      } else if (std::string("{}[](),=:<>").find(c) != std::string::npos) {
        t.type = Tok::punct;
        t.text = std::string(1, take());
      } else {
        throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col_);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  bool at_end() const { return i_ >= text_.size(); }
  char peek(std::size_t k = 0) const { return i_ + k < text_.size() ? text_[i_ + k] : '\0'; }
  char take() {
    char c = text_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  void advance(std::size_t n) {
    while (n-- && !at_end()) take();
  }

  void skip_space() {
    while (!at_end()) {
      char c = peek();
      if (c == '#') {
        while (!at_end() && peek() != '\n') take();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        take();
      } else {
        break;
      }
    }
  }

  bool starts_number() const {
    char c = peek();
    auto digit = [](char d) { return std::isdigit(static_cast<unsigned char>(d)) != 0; };
    if (digit(c)) return true;
    if (c == '-' || c == '+') return digit(peek(1)) || (peek(1) == '.' && digit(peek(2)));
    return c == '.' && digit(peek(1));
  }

  void lex_number_or_word(Token& t) {
    const std::size_t start = i_;
    std::size_t j = i_;
    auto digit = [&](std::size_t k) { return k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k])); };
    if (text_[j] == '-' || text_[j] == '+') ++j;
    while (digit(j)) ++j;
    if (j < text_.size() && text_[j] == '.') {
      ++j;
      while (digit(j)) ++j;
    }
    if (j < text_.size() && (text_[j] == 'e' || text_[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < text_.size() && (text_[k] == '-' || text_[k] == '+')) ++k;
      if (digit(k)) {
        while (digit(k)) ++k;
        j = k;
      }
    }
    const bool signed_start = text_[start] == '-' || text_[start] == '+';
    if (j < text_.size() && is_id_char(text_[j])) {
      if (signed_start) throw SyntaxError("malformed number", line_, col_);
      // Identifier that happens to start with digits, e.g. "2nd".
      t.type = Tok::word;
      while (!at_end() && is_id_char(peek())) t.text += take();
      return;
    }
    std::string lexeme = text_.substr(start, j - start);
    std::string_view digits = lexeme;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
      throw SyntaxError("malformed number '" + lexeme + "'", line_, col_);
    t.type = Tok::number;
    t.number = v;
    t.text = lexeme;
    advance(j - start);
  }

  std::string lex_string() {
    const auto line = line_, col = col_;
    take();  // opening quote
    std::string s;
    for (;;) {
      if (at_end() || peek() == '\n') throw SyntaxError("unterminated string", line, col);
      char c = take();
      if (c == '"') return s;
      if (c == '\\') {
        if (at_end()) throw SyntaxError("unterminated string", line, col);
        char e = take();
        if (e == 'n')
          s += '\n';
        else
          s += e;
      } else {
        s += c;
      }
    }
  }

  const std::string& text_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

// Generic call/attribute value.
struct Value {
  enum class Type { number, word, string, list };
  Type type = Type::number;
  double number = 0.0;
  std::string text;
  std::vector<Value> list;
  SourcePos pos;
};

struct Call {
  std::string name;
  SourcePos pos;
  std::vector<std::pair<std::string, Value>> args;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  SourceModel run(const std::string& text) {
    SourceModel model;
    model.text = text;
    model_ = &model;
    bool seen_header = false;
    while (peek().type != Tok::end) {
      const Token& t = peek();
      if (t.type != Tok::word) fail_expected("a statement keyword");
      if (t.text == "hierarchy") {
        if (seen_header) throw SyntaxError("duplicate hierarchy header", t.pos.line, t.pos.column);
        seen_header = true;
        next();
        model.hierarchy.name = expect_id("hierarchy name");
      } else if (t.text == "pm") {
        parse_pm();
      } else if (t.text == "sync") {
        parse_sync();
      } else if (t.text == "level") {
        parse_level();
      } else if (t.text == "grammar") {
        parse_grammar();
      } else {
        fail_expected("'hierarchy', 'pm', 'level', 'sync' or 'grammar'");
      }
    }
    return model;
  }

 private:
  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail_expected(const std::string& what) const {
    const Token& t = peek();
    std::string got = t.type == Tok::end ? "end of input" : "'" + t.text + "'";
    throw SyntaxError("expected " + what + ", got " + got, t.pos.line, t.pos.column);
  }

  bool is_punct(const std::string& p, std::size_t k = 0) const {
    return peek(k).type == Tok::punct && peek(k).text == p;
  }
  bool is_word(const std::string& w, std::size_t k = 0) const {
    return peek(k).type == Tok::word && peek(k).text == w;
  }

  void expect_punct(const std::string& p) {
    if (!is_punct(p)) fail_expected("'" + p + "'");
    next();
  }
  void expect_word(const std::string& w) {
    if (!is_word(w)) fail_expected("'" + w + "'");
    next();
  }

  static bool valid_id(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
      if (!is_id_char(c)) return false;
    return true;
  }

  std::string expect_id(const std::string& what) {
    const Token& t = peek();
    if ((t.type == Tok::word || t.type == Tok::number) && valid_id(t.text)) {
      next();
      return t.text;
    }
    fail_expected(what);
  }

  double expect_number(const std::string& what) {
    if (peek().type != Tok::number) fail_expected(what);
    return next().number;
  }

  std::size_t expect_count(const std::string& what) {
    const Token& t = peek();
    double v = expect_number(what);
    if (v < 0 || v != static_cast<double>(static_cast<long long>(v)))
      throw SyntaxError(what + " must be a non-negative integer", t.pos.line, t.pos.column);
    return static_cast<std::size_t>(v);
  }

  std::vector<std::string> parse_id_list() {
    expect_punct("[");
    std::vector<std::string> ids;
    if (!is_punct("]")) {
      ids.push_back(expect_id("an identifier"));
      while (is_punct(",")) {
        next();
        ids.push_back(expect_id("an identifier"));
      }
    }
    expect_punct("]");
    return ids;
  }

  Value parse_value() {
    const Token& t = peek();
    Value v;
    v.pos = t.pos;
    switch (t.type) {
      case Tok::number:
        v.type = Value::Type::number;
        v.number = t.number;
        v.text = t.text;
        next();
        return v;
      case Tok::word:
        v.type = Value::Type::word;
        v.text = t.text;
        next();
        return v;
      case Tok::string:
        v.type = Value::Type::string;
        v.text = t.text;
        next();
        return v;
      case Tok::punct:
        if (t.text == "[") {
          next();
          v.type = Value::Type::list;
          if (!is_punct("]")) {
            v.list.push_back(parse_value());
            while (is_punct(",")) {
              next();
              v.list.push_back(parse_value());
            }
          }
          expect_punct("]");
          return v;
        }
        break;
      case Tok::end:
        break;
    }
    fail_expected("a value");
  }

  Call parse_call(const std::string& what) {
    Call c;
    c.pos = peek().pos;
    if (peek().type != Tok::word) fail_expected(what);
    c.name = next().text;
    expect_punct("(");
    if (!is_punct(")")) {
      for (;;) {
        if (peek().type != Tok::word) fail_expected("a parameter name");
        std::string key = next().text;
        expect_punct("=");
        c.args.emplace_back(key, parse_value());
        if (!is_punct(",")) break;
        next();
      }
    }
    expect_punct(")");
    return c;
  }

  // -- value coercions -----------------------------------------------------

  static double as_number(const Value& v, const std::string& key) {
    if (v.type != Value::Type::number)
      throw SyntaxError("parameter '" + key + "' expects a number", v.pos.line, v.pos.column);
    return v.number;
  }

  static std::size_t as_index(const Value& v, const std::string& key) {
    double d = as_number(v, key);
    if (d < 0 || d != static_cast<double>(static_cast<long long>(d)))
      throw SyntaxError("parameter '" + key + "' expects a non-negative integer", v.pos.line, v.pos.column);
    return static_cast<std::size_t>(d);
  }

  static bool as_bool(const Value& v, const std::string& key) {
    if (v.type == Value::Type::word && (v.text == "true" || v.text == "false")) return v.text == "true";
    throw SyntaxError("parameter '" + key + "' expects true or false", v.pos.line, v.pos.column);
  }

  static std::vector<double> as_numbers(const Value& v, const std::string& key) {
    if (v.type != Value::Type::list)
      throw SyntaxError("parameter '" + key + "' expects a list", v.pos.line, v.pos.column);
    std::vector<double> out;
    for (const auto& item : v.list) out.push_back(as_number(item, key));
    return out;
  }

  // Applies each argument through `setter`, rejecting unknown keys.
  template <class Setter>
  static void apply_args(const Call& c, Setter&& setter) {
    std::set<std::string> seen;
    for (const auto& [key, value] : c.args) {
      if (!seen.insert(key).second)
        throw SyntaxError("duplicate parameter '" + key + "'", value.pos.line, value.pos.column);
      if (!setter(key, value))
        throw SyntaxError("unknown parameter '" + key + "' for " + c.name, value.pos.line, value.pos.column);
    }
  }

  OperatorSpec make_operator(const Call& c) {
    const auto& n = c.name;
    if (n == "const") {
      op::Const o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "value") return o.value = as_number(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "wsum") {
      op::WeightedSum o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "w") return o.weights = as_numbers(v, k), true;
        if (k == "bias") return o.bias = as_number(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "product") {
      apply_args(c, [](const std::string&, const Value&) { return false; });
      return op::Product{};
    }
    if (n == "minmax") {
      op::MinMax o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k != "mode") return false;
        if (v.type == Value::Type::word && (v.text == "min" || v.text == "max")) {
          o.mode = v.text == "min" ? op::Extremum::min : op::Extremum::max;
          return true;
        }
        throw SyntaxError("minmax mode must be min or max", v.pos.line, v.pos.column);
      });
      return o;
    }
    if (n == "threshold") {
      op::Threshold o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "theta") return o.theta = as_number(v, k), true;
        if (k == "lo") return o.lo = as_number(v, k), true;
        if (k == "hi") return o.hi = as_number(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "leaky") {
      op::Leaky o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "lambda") return o.lambda = as_number(v, k), true;
        if (k == "gain") return o.gain = as_number(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "ema") {
      op::Ema o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "beta") return o.beta = as_number(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "resonator") {
      op::Resonator o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "f") return o.freq = as_number(v, k), true;
        if (k == "damping") return o.damping = as_number(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "oscillator") {
      op::Oscillator o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "omega") return o.omega = as_number(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "table") {
      op::Table o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "rows") return o.rows = as_numbers(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "proportional") {
      op::Proportional o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "k") return o.gain = as_number(v, k), true;
        if (k == "target") return o.target = as_index(v, k), true;
        if (k == "measure") return o.measure = as_index(v, k), true;
        return false;
      });
      return o;
    }
    if (n == "noise") {
      op::Noise o;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "sigma") return o.sigma = as_number(v, k), true;
        if (k == "clamp") return o.clamp = as_bool(v, k), true;
        return false;
      });
      return o;
    }
    throw UnknownOperatorKind("unknown state operator '" + n + "'", c.pos.line, c.pos.column);
  }

  ActivationSpec make_activation(const Call& c) {
    if (c.name == "identity") {
      act::Identity a;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "index") return a.index = as_index(v, k), true;
        return false;
      });
      return a;
    }
    if (c.name == "linear") {
      act::Linear a;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "gain") return a.gain = as_number(v, k), true;
        if (k == "bias") return a.bias = as_number(v, k), true;
        if (k == "index") return a.index = as_index(v, k), true;
        return false;
      });
      return a;
    }
    if (c.name == "threshold") {
      act::Threshold a;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "theta") return a.theta = as_number(v, k), true;
        if (k == "lo") return a.lo = as_number(v, k), true;
        if (k == "hi") return a.hi = as_number(v, k), true;
        if (k == "index") return a.index = as_index(v, k), true;
        return false;
      });
      return a;
    }
    throw UnknownOperatorKind("unknown activation operator '" + c.name + "'", c.pos.line, c.pos.column);
  }

  SignalSpec make_signal(const Call& c) {
    if (c.name == "const") {
      signal::Const s;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "value") return s.value = as_number(v, k), true;
        return false;
      });
      return s;
    }
    if (c.name == "step") {
      signal::Step s;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "at") return s.at = as_number(v, k), true;
        if (k == "lo") return s.lo = as_number(v, k), true;
        if (k == "hi") return s.hi = as_number(v, k), true;
        return false;
      });
      return s;
    }
    if (c.name == "sine") {
      signal::Sine s;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "amplitude") return s.amplitude = as_number(v, k), true;
        if (k == "freq") return s.freq = as_number(v, k), true;
        if (k == "phase") return s.phase = as_number(v, k), true;
        if (k == "offset") return s.offset = as_number(v, k), true;
        return false;
      });
      return s;
    }
    if (c.name == "square") {
      signal::Square s;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "period") return s.period = as_number(v, k), true;
        if (k == "lo") return s.lo = as_number(v, k), true;
        if (k == "hi") return s.hi = as_number(v, k), true;
        return false;
      });
      return s;
    }
    if (c.name == "series") {
      signal::Series s;
      apply_args(c, [&](const std::string& k, const Value& v) {
        if (k == "values") return s.values = as_numbers(v, k), true;
        return false;
      });
      return s;
    }
    throw UnknownOperatorKind("unknown signal kind '" + c.name + "'", c.pos.line, c.pos.column);
  }

  // -- statements ----------------------------------------------------------

  void record(const std::string& key, SourcePos pos) { model_->spans.emplace(key, pos); }

  void parse_pm() {
    next();
    SourcePos pos = peek().pos;
    std::string id = expect_id("signal source id");
    expect_punct("=");
    SignalSpec sig = make_signal(parse_call("a signal"));
    if (!model_->hierarchy.pm_sources.emplace(id, std::move(sig)).second)
      throw DuplicateId("duplicate signal source '" + id + "'", pos.line, pos.column);
    record("pm/" + id, pos);
  }

  void parse_sync() {
    const SourcePos pos = next().pos;
    std::string upper = expect_id("upper level name");
    expect_punct(":");
    std::string lower = expect_id("lower level name");
    expect_punct("=");
    const Token& t = peek();
    std::size_t r = expect_count("sync ratio");
    if (r == 0) throw SyntaxError("sync ratio must be positive", t.pos.line, t.pos.column);
    pending_syncs_.push_back({upper, lower, static_cast<int>(r), pos});
    if (!model_->hierarchy.sync_ratios.emplace(upper, static_cast<int>(r)).second)
      throw DuplicateId("duplicate sync ratio for '" + upper + "'", pos.line, pos.column);
    check_syncs();
  }

  void check_syncs() {
    // A sync names adjacent levels once both are known, in either order of declaration.
    const auto& levels = model_->hierarchy.levels;
    for (const auto& s : pending_syncs_) {
      std::optional<std::size_t> up, lo;
      for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i].name == s.upper) up = i;
        if (levels[i].name == s.lower) lo = i;
      }
      if (up && lo && *up != *lo + 1)
        throw SyntaxError("sync '" + s.upper + ":" + s.lower + "' does not name adjacent levels (upper:lower)",
                          s.pos.line, s.pos.column);
    }
  }

  ObserverSpec parse_observer_body() {
    ObserverSpec spec;
    spec.id = expect_id("observer id");
    std::optional<std::size_t> dim;
    std::set<std::string> seen;
    while (peek().type == Tok::word && is_punct("=", 1)) {
      const Token key_tok = next();
      const std::string& key = key_tok.text;
      next();  // '='
      if (!seen.insert(key).second)
        throw SyntaxError("duplicate attribute '" + key + "'", key_tok.pos.line, key_tok.pos.column);
      if (key == "role") {
        auto r = parse_role(expect_id("role"));
        if (!r) throw SyntaxError("role must be input, intermediate or output", key_tok.pos.line, key_tok.pos.column);
        spec.role = *r;
      } else if (key == "kind") {
        auto k = parse_kind(expect_id("kind"));
        if (!k) throw SyntaxError("kind must be grounded or free", key_tok.pos.line, key_tok.pos.column);
        spec.kind = *k;
      } else if (key == "quality") {
        if (peek().type != Tok::string) fail_expected("a quoted quality label");
        spec.quality = next().text;
      } else if (key == "dim") {
        dim = expect_count("state dimension");
      } else if (key == "state") {
        spec.state_op = make_operator(parse_call("a state operator"));
      } else if (key == "act") {
        spec.act_op = make_activation(parse_call("an activation operator"));
      } else if (key == "mod") {
        auto m = parse_modulation(expect_id("modulation"));
        if (!m)
          throw SyntaxError("mod must be none, min_gate or product_gate", key_tok.pos.line, key_tok.pos.column);
        spec.modulation = *m;
      } else if (key == "components") {
        spec.components = parse_id_list();
      } else if (key == "init") {
        Value v = parse_value();
        spec.initial_state = as_numbers(v, key);
      } else {
        throw SyntaxError("unknown observer attribute '" + key + "'", key_tok.pos.line, key_tok.pos.column);
      }
    }
    if (dim)
      spec.state_dim = *dim;
    else
      spec.state_dim = (spec.role == Role::input || !spec.state_op) ? 0 : natural_state_dim(*spec.state_op);
    return spec;
  }

  EventAction parse_action() {
    const Token& t = peek();
    if (t.type != Tok::word) fail_expected("an event action");
    const std::string verb = next().text;
    if (verb == "terminate") return event::Terminate{expect_id("observer id")};
    if (verb == "create") {
      expect_word("observer");
      return event::Create{parse_observer_body()};
    }
    if (verb == "bind" || verb == "unbind" || verb == "split") {
      std::string a = expect_id("observer id");
      expect_punct("->");
      std::string b = expect_id("observer id");
      if (verb == "bind") return event::Bind{a, b};
      if (verb == "unbind") return event::Unbind{a, b};
      return event::Split{a, b};
    }
    if (verb == "join") {
      auto members = parse_id_list();
      expect_punct("->");
      return event::Join{members, expect_id("compound id")};
    }
    throw SyntaxError("unknown event action '" + verb + "'", t.pos.line, t.pos.column);
  }

  StructureEventRule parse_event() {
    next();  // when
    StructureEventRule rule;
    expect_word("a");
    expect_punct("(");
    rule.trigger.observer = expect_id("observer id");
    expect_punct(")");
    if (is_punct(">"))
      rule.trigger.direction = Direction::above;
    else if (is_punct("<"))
      rule.trigger.direction = Direction::below;
    else
      fail_expected("'>' or '<'");
    next();
    rule.trigger.threshold = expect_number("threshold");
    expect_word("for");
    const Token& kt = peek();
    std::size_t k = expect_count("persistence");
    if (k == 0) throw SyntaxError("persistence must be at least 1 step", kt.pos.line, kt.pos.column);
    rule.trigger.persistence = static_cast<int>(k);
    expect_word("steps");
    expect_punct(":");
    rule.action = parse_action();
    return rule;
  }

  void parse_level() {
    next();
    const SourcePos pos = peek().pos;
    LevelModel level;
    level.name = expect_id("level name");
    for (const auto& l : model_->hierarchy.levels)
      if (l.name == level.name) throw DuplicateId("duplicate level '" + level.name + "'", pos.line, pos.column);
    record("level/" + level.name, pos);

    expect_word("mode");
    if (is_word("discrete")) {
      next();
    } else if (is_word("continuous")) {
      next();
      expect_word("dt");
      expect_punct("=");
      level.progression.mode = Progression::Mode::continuous;
      level.progression.dt = expect_number("time step");
    } else {
      fail_expected("'discrete' or 'continuous'");
    }
    if (is_word("clamp")) {
      next();
      level.clamp_negative = true;
    }
    expect_punct("{");
    auto& groundings = model_->hierarchy.groundings;
    while (!is_punct("}")) {
      if (is_word("observer")) {
        next();
        const SourcePos opos = peek().pos;
        ObserverSpec spec = parse_observer_body();
        if (level.contains(spec.id))
          throw DuplicateId("duplicate observer '" + spec.id + "' in level '" + level.name + "'", opos.line,
                            opos.column);
        record(level.name + "/" + spec.id, opos);
        level.add(std::move(spec));
      } else if (is_word("grounding")) {
        next();
        const SourcePos gpos = peek().pos;
        std::string id = expect_id("grounded observer id");
        expect_punct("<-");
        GroundingSpec g;
        g.lower_ids = parse_id_list();
        expect_word("agg");
        expect_punct("=");
        const Token& at = peek();
        auto agg = parse_aggregator(expect_id("aggregator"));
        if (!agg) throw SyntaxError("agg must be latest, mean or max", at.pos.line, at.pos.column);
        g.aggregator = *agg;
        expect_word("state");
        expect_punct("=");
        g.state_op = make_operator(parse_call("a state operator"));
        if (!groundings[level.name].emplace(id, std::move(g)).second)
          throw DuplicateId("duplicate grounding for '" + id + "'", gpos.line, gpos.column);
        record("grounding/" + level.name + "/" + id, gpos);
      } else if (is_word("when")) {
        level.events.push_back(parse_event());
      } else {
        fail_expected("'observer', 'grounding', 'when' or '}'");
      }
    }
    next();
    model_->hierarchy.levels.push_back(std::move(level));
    check_syncs();
  }

  void parse_grammar() {
    next();
    TermGrammar g;
    g.name = expect_id("grammar name");
    expect_punct("{");
    bool has_form = false;
    while (!is_punct("}")) {
      const SourcePos pos = peek().pos;
      if (is_word("form") && is_punct("[", 1)) {
        next();
        if (has_form) throw SyntaxError("duplicate form", pos.line, pos.column);
        has_form = true;
        g.form = parse_id_list();
        continue;
      }
      Nonterminal nt;
      nt.name = expect_id("nonterminal name");
      for (const auto& other : g.nonterminals)
        if (other.name == nt.name) throw DuplicateId("duplicate nonterminal '" + nt.name + "'", pos.line, pos.column);
      if (is_punct("->")) {
        next();
        nt.children = parse_id_list();
        if (nt.children.empty()) throw SyntaxError("production has no children", pos.line, pos.column);
      } else if (is_punct("=")) {
        next();
        expect_punct("{");
        for (;;) {
          Terminal term;
          term.name = expect_id("terminal name");
          if (peek().type != Tok::string) fail_expected("a quoted terminal symbol");
          term.symbol = next().text;
          nt.alphabet.push_back(std::move(term));
          if (!is_punct(",")) break;
          next();
        }
        expect_punct("}");
      } else {
        fail_expected("'->' or '='");
      }
      g.nonterminals.push_back(std::move(nt));
    }
    next();
    model_->grammars.push_back(std::move(g));
  }

  struct PendingSync {
    std::string upper, lower;
    int ratio;
    SourcePos pos;
  };

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  SourceModel* model_ = nullptr;
  std::vector<PendingSync> pending_syncs_;
};

}  // namespace

const SourcePos* SourceModel::observer_span(const std::string& level, const ObserverId& id) const {
  auto it = spans.find(level + "/" + id);
  return it == spans.end() ? nullptr : &it->second;
}

SourceModel parse_source(const std::string& text) {
  Lexer lexer(text);
  Parser parser(lexer.run());
  return parser.run(text);
}

Hierarchy parse_model(const std::string& text) { return parse_source(text).hierarchy; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot replace '" + path + "'");
  }
}

}  // namespace fluent
