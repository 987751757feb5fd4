#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "fluent/dsl.hpp"
#include "fluent/error.hpp"
#include "fluent/models.hpp"
#include "generators.hpp"

using namespace fluent;
namespace ft = fluent::testing;

namespace {

std::string model_file(const std::string& name) {
  return read_file((ft::source_root() / "models" / (name + ".fc")).string());
}

template <class E>
E expect_throw(const std::string& text) {
  try {
    parse_model(text);
  } catch (const E& e) {
    return e;
  }
  ADD_FAILURE() << "no exception for:\n" << text;
  throw std::runtime_error("missing exception");
}

}  // namespace

TEST(Dsl, MinimalLevel) {
  const Hierarchy h = parse_model(R"(
hierarchy tiny
level one mode discrete {
  observer a role=input kind=free
  observer b components=[a] state=wsum(w=[1], bias=0)  # trailing comment
}
)");
  ASSERT_EQ(h.levels.size(), 1u);
  EXPECT_EQ(h.name, "tiny");
  EXPECT_EQ(h.levels[0].observers.size(), 2u);
  EXPECT_EQ(h.levels[0].at("b").components, std::vector<ObserverId>{"a"});
  EXPECT_EQ(h.levels[0].at("a").state_dim, 0u);
  EXPECT_EQ(h.levels[0].at("b").state_dim, 1u);
}

TEST(Dsl, UnclosedListReportsItsLine) {
  const std::string text =
      "hierarchy x\n"
      "level one mode discrete {\n"
      "  observer a role=input\n"
      "  observer b components=[a\n"
      "}\n";
  const auto e = expect_throw<SyntaxError>(text);
  EXPECT_GE(e.line(), 4u);
  EXPECT_LE(e.line(), 5u);
}

TEST(Dsl, ErrorsCarryPositionsInsideTheText) {
  const std::vector<std::string> bad = {
      "hierarchy",
      "level a mode sometimes {}",
      "level a mode discrete { observer }",
      "level a mode discrete { observer x state=warp() }",
      "level a mode discrete { observer x act=bend() }",
      "pm s = wobble()",
      "level a mode discrete { observer x quality=\"open }",
      "level a mode discrete {} level b mode discrete {} sync a:b = 2",
      "level a mode discrete { observer x role=boss }",
      "level a mode discrete { observer x } level a mode discrete {}",
      "level a mode discrete { observer x observer x }",
      "level a mode discrete { when a(x) > 1 for 0 steps: terminate x }",
      "level a mode discrete { observer x state=wsum(w=[1], w=[2]) }",
      "level a mode discrete { observer x $ }",
  };
  for (const auto& text : bad) {
    try {
      parse_model(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 1u) << text;
      EXPECT_GE(e.column(), 1u) << text;
      EXPECT_LE(e.column(), text.size() + 1) << text;
    }
  }
}

TEST(Dsl, SpecificErrorClasses) {
  expect_throw<UnknownOperatorKind>("level a mode discrete { observer x state=warp() }");
  expect_throw<DuplicateId>("level a mode discrete { observer x observer x }");
  expect_throw<DuplicateId>("pm s = const(value=1)\npm s = const(value=2)");
}

TEST(Dsl, EmptyHierarchyRendersHeaderOnly) {
  Hierarchy h;
  h.name = "empty";
  const std::string text = render_model(h);
  EXPECT_EQ(text, "hierarchy empty\n");
  EXPECT_EQ(parse_model(text), h);
}

TEST(Dsl, ObserverFieldOrderIsFixed) {
  ObserverSpec s;
  s.id = "v";
  s.role = Role::output;
  s.quality = "q";
  s.state_op = op::Ema{0.25};
  s.state_dim = 1;
  s.components = {"a"};
  const std::string line = render_observer(s);
  const auto pos = [&](const char* key) { return line.find(key); };
  EXPECT_LT(pos("role="), pos("kind="));
  EXPECT_LT(pos("kind="), pos("quality="));
  EXPECT_LT(pos("quality="), pos("state="));
  EXPECT_LT(pos("state="), pos("components="));
}

TEST(Dsl, NumbersRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 5e-324, 123456789.0, 0.0}) {
    const std::string t = format_number(v);
    EXPECT_EQ(std::strtod(t.c_str(), nullptr), v) << t;
  }
}

TEST(Dsl, RandomHierarchiesRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const Hierarchy h = ft::random_hierarchy(rng);
    const std::string text = render_model(h);
    Hierarchy back;
    ASSERT_NO_THROW(back = parse_model(text)) << text;
    ASSERT_EQ(back, h) << text;
    EXPECT_EQ(render_model(back), text);
  }
}

TEST(Dsl, ParsingIsDeterministic) {
  const std::string text = model_file("multiplier");
  EXPECT_EQ(parse_model(text), parse_model(text));
}

TEST(Dsl, ShippedFilesMatchTheBuilders) {
  EXPECT_EQ(parse_model(model_file("governor")), build_governor());
  EXPECT_EQ(parse_model(model_file("multiplier")), build_multiplier());
  EXPECT_EQ(parse_model(model_file("adder")), build_adder_model(3, 6, 4));
  EXPECT_EQ(parse_model(model_file("clock")), build_clocked_term());
  const SourceModel arith = parse_source(model_file("arith"));
  ASSERT_EQ(arith.grammars.size(), 2u);
  EXPECT_EQ(arith.grammars[0], arithmetic_grammar());
  EXPECT_EQ(arith.grammars[1], decimal_grammar());
}

TEST(Dsl, ShippedFilesAreCanonical) {
  for (const auto& name : example_names()) {
    const std::string text = model_file(name);
    const SourceModel src = parse_source(text);
    EXPECT_EQ(render_source(src.hierarchy, src.grammars), text) << name;
    EXPECT_EQ(example_source(name), text) << name;
  }
}

TEST(Dsl, SpansPointAtDeclarations) {
  const SourceModel src = parse_source("hierarchy s\nlevel L mode discrete {\n  observer a role=input\n}\n");
  const SourcePos* p = src.observer_span("L", "a");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->line, 3u);
}

TEST(Dsl, GrammarBlocksRoundTrip) {
  const TermGrammar g = arithmetic_grammar();
  const SourceModel src = parse_source(render_grammar(g));
  ASSERT_EQ(src.grammars.size(), 1u);
  EXPECT_EQ(src.grammars[0], g);
}
