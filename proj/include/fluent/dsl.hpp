#pragma once

// Textual model-definition language (.fc files). See docs/grammar.md.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "fluent/model.hpp"
#include "fluent/symbolic.hpp"

namespace fluent {

struct SourcePos {
  std::size_t line = 0;
  std::size_t column = 0;
};

struct SourceModel {
  std::string text;
  Hierarchy hierarchy;
  std::vector<TermGrammar> grammars;
  // "level/observer", "pm/<id>", "grounding/<level>/<id>", "level/<name>" -> position
  std::map<std::string, SourcePos> spans;

  /// Position of an observer declaration, if recorded.
  const SourcePos* observer_span(const std::string& level, const ObserverId& id) const;
};

/// Throws SyntaxError, DuplicateId or UnknownOperatorKind. No semantic
/// validation beyond what the grammar itself enforces.
SourceModel parse_source(const std::string& text);

Hierarchy parse_model(const std::string& text);

/// Canonical formatting of a hierarchy.
std::string render_model(const Hierarchy& h);

/// Canonical formatting of a hierarchy followed by grammar blocks.
std::string render_source(const Hierarchy& h, const std::vector<TermGrammar>& grammars);

std::string render_grammar(const TermGrammar& g);
std::string render_observer(const ObserverSpec& spec);
std::string render_operator(const OperatorSpec& op);

/// Shortest decimal text that reads back to the same binary64.
std::string format_number(double v);

std::string read_file(const std::string& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace fluent
