#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace forge::html {

// Tolerant HTML tree with source offsets, enough for link extraction, static
// audits and the simulated browser. Not a conforming HTML5 parser.
struct Node {
  std::string tag;  // lowercase element name, "#text", "#comment" or "#document"
  std::vector<std::pair<std::string, std::string>> attrs;
  std::string text;  // decoded text for #text, raw body for script/style/#comment
  Node* parent = nullptr;
  std::vector<Node*> children;

  // Offsets into the source: [start, open_end) is the start tag,
  // [close_start, end) the end tag (equal to end when absent).
  std::size_t start = 0;
  std::size_t open_end = 0;
  std::size_t close_start = 0;
  std::size_t end = 0;

  bool is_element() const noexcept { return !tag.empty() && tag[0] != '#'; }
  std::optional<std::string> attr(std::string_view name) const;
  bool has_attr(std::string_view name) const { return attr(name).has_value(); }
  bool has_class(std::string_view cls) const;
  // Concatenated descendant text, whitespace collapsed and trimmed.
  std::string text_content() const;
  // Nearest ancestor (or self) with the given tag.
  const Node* closest(std::string_view tag_name) const;
};

class Document {
public:
  // Throws ParseError on unterminated tags, comments or attribute quotes.
  static Document parse(std::string_view source);

  Document(Document&&) noexcept = default;
  Document& operator=(Document&&) noexcept = default;
  Document(const Document&) = delete;
  Document& operator=(const Document&) = delete;

  const Node& root() const { return *root_; }
  const std::string& source() const noexcept { return source_; }

  // Depth-first document order.
  std::vector<const Node*> find_all(const std::function<bool(const Node&)>& pred) const;
  std::vector<const Node*> by_tag(std::string_view tag) const;
  const Node* by_id(std::string_view id) const;
  const Node* first(std::string_view tag) const;

private:
  Document() = default;
  std::string source_;
  std::deque<Node> nodes_;
  Node* root_ = nullptr;
};

std::string decode_entities(std::string_view s);
std::string escape_text(std::string_view s);
std::string escape_attr(std::string_view s);

bool is_void_element(std::string_view tag);

} // namespace forge::html
