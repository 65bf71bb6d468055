#include "forge/html.hpp"

#include "forge/errors.hpp"
#include "forge/util.hpp"

#include <cctype>

namespace forge::html {

namespace {

bool is_raw_text(std::string_view tag) { return tag == "script" || tag == "style"; }

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':';
}

// Start tags that implicitly close an open element of the same kind.
bool self_nesting_forbidden(std::string_view tag) {
  return tag == "p" || tag == "li" || tag == "option" || tag == "tr" || tag == "td" || tag == "th";
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

} // namespace

bool is_void_element(std::string_view tag) {
  static constexpr std::string_view kVoid[] = {"area", "base", "br",   "col",   "embed",
                                               "hr",   "img",  "input", "link", "meta",
                                               "source", "track", "wbr"};
  for (auto v : kVoid) {
    if (v == tag) return true;
  }
  return false;
}

std::optional<std::string> Node::attr(std::string_view name) const {
  for (const auto& [k, v] : attrs) {
    if (k == name) return v;
  }
  return std::nullopt;
}

bool Node::has_class(std::string_view cls) const {
  auto c = attr("class");
  if (!c) return false;
  for (const auto& part : util::split_ws(*c)) {
    if (part == cls) return true;
  }
  return false;
}

namespace {

void gather_text(const Node& n, std::string& out) {
  if (n.tag == "#text") {
    out += n.text;
    out += ' ';
    return;
  }
  if (n.tag == "script" || n.tag == "style" || n.tag == "#comment") return;
  for (const Node* c : n.children) gather_text(*c, out);
}

} // namespace

std::string Node::text_content() const {
  std::string raw;
  gather_text(*this, raw);
  std::string out;
  bool space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
    } else {
      if (space && !out.empty()) out += ' ';
      space = false;
      out += c;
    }
  }
  return out;
}

const Node* Node::closest(std::string_view tag_name) const {
  for (const Node* n = this; n; n = n->parent) {
    if (n->tag == tag_name) return n;
  }
  return nullptr;
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const std::size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += '&';
      continue;
    }
    const std::string_view ent = s.substr(i + 1, semi - i - 1);
    if (!ent.empty() && ent[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X'))
                 ? std::stoul(std::string(ent.substr(2)), nullptr, 16)
                 : std::stoul(std::string(ent.substr(1)));
      } catch (...) {
        out += '&';
        continue;
      }
      append_utf8(out, cp);
    } else if (ent == "amp") {
      out += '&';
    } else if (ent == "lt") {
      out += '<';
    } else if (ent == "gt") {
      out += '>';
    } else if (ent == "quot") {
      out += '"';
    } else if (ent == "apos") {
      out += '\'';
    } else if (ent == "nbsp") {
      out += ' ';
    } else if (ent == "times") {
      append_utf8(out, 0xD7);
    } else if (ent == "copy") {
      append_utf8(out, 0xA9);
    } else if (ent == "middot") {
      append_utf8(out, 0xB7);
    } else if (ent == "rarr") {
      append_utf8(out, 0x2192);
    } else {
      out += '&';
      continue;
    }
    i = semi;
  }
  return out;
}

std::string escape_text(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string escape_attr(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else if (c == '<') out += "&lt;";
    else out += c;
  }
  return out;
}

Document Document::parse(std::string_view src) {
  Document doc;
  doc.source_ = std::string(src);
  const std::string& s = doc.source_;
  auto& nodes = doc.nodes_;

  nodes.emplace_back();
  Node* root = &nodes.back();
  root->tag = "#document";
  root->end = s.size();
  root->close_start = s.size();
  doc.root_ = root;

  std::vector<Node*> stack{root};
  auto add_child = [&](Node n) -> Node* {
    nodes.push_back(std::move(n));
    Node* p = &nodes.back();
    p->parent = stack.back();
    stack.back()->children.push_back(p);
    return p;
  };

  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      const std::size_t j = s.find('<', i);
      const std::size_t stop = j == std::string::npos ? s.size() : j;
      Node t;
      t.tag = "#text";
      t.text = decode_entities(std::string_view(s).substr(i, stop - i));
      t.start = i;
      t.open_end = t.close_start = t.end = stop;
      add_child(std::move(t));
      i = stop;
      continue;
    }
    if (s.compare(i, 4, "<!--") == 0) {
      const std::size_t j = s.find("-->", i + 4);
      if (j == std::string::npos) throw ParseError("unterminated comment at offset " + std::to_string(i));
      Node c;
      c.tag = "#comment";
      c.text = s.substr(i + 4, j - i - 4);
      c.start = i;
      c.open_end = c.close_start = c.end = j + 3;
      add_child(std::move(c));
      i = j + 3;
      continue;
    }
    if (i + 1 < s.size() && (s[i + 1] == '!' || s[i + 1] == '?')) {
      const std::size_t j = s.find('>', i);
      if (j == std::string::npos) throw ParseError("unterminated declaration at offset " + std::to_string(i));
      i = j + 1;
      continue;
    }
    if (i + 1 < s.size() && s[i + 1] == '/') {
      const std::size_t j = s.find('>', i);
      if (j == std::string::npos) throw ParseError("unterminated end tag at offset " + std::to_string(i));
      std::string name = util::to_lower(util::trim(std::string_view(s).substr(i + 2, j - i - 2)));
      for (std::size_t k = stack.size(); k-- > 1;) {
        if (stack[k]->tag == name) {
          for (std::size_t m = stack.size(); m-- > k;) {
            if (m != k) stack[m]->close_start = stack[m]->end = i;
          }
          stack[k]->close_start = i;
          stack[k]->end = j + 1;
          stack.resize(k);
          break;
        }
      }
      i = j + 1;
      continue;
    }
    if (i + 1 >= s.size() || !std::isalpha(static_cast<unsigned char>(s[i + 1]))) {
      Node t;
      t.tag = "#text";
      t.text = "<";
      t.start = i;
      t.open_end = t.close_start = t.end = i + 1;
      add_child(std::move(t));
      ++i;
      continue;
    }

    // start tag
    Node el;
    el.start = i;
    std::size_t p = i + 1;
    while (p < s.size() && name_char(s[p])) ++p;
    el.tag = util::to_lower(std::string_view(s).substr(i + 1, p - i - 1));
    bool self_closing = false;
    while (true) {
      while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
      if (p >= s.size()) throw ParseError("unterminated start tag <" + el.tag + "> at offset " + std::to_string(i));
      if (s[p] == '>') {
        ++p;
        break;
      }
      if (s[p] == '/') {
        self_closing = true;
        ++p;
        continue;
      }
      const std::size_t nb = p;
      while (p < s.size() && !std::isspace(static_cast<unsigned char>(s[p])) && s[p] != '=' &&
             s[p] != '>' && s[p] != '/') {
        ++p;
      }
      std::string name = util::to_lower(std::string_view(s).substr(nb, p - nb));
      std::string value;
      while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
      if (p < s.size() && s[p] == '=') {
        ++p;
        while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
        if (p < s.size() && (s[p] == '"' || s[p] == '\'')) {
          const char q = s[p];
          const std::size_t close = s.find(q, p + 1);
          if (close == std::string::npos) {
            throw ParseError("unterminated attribute value in <" + el.tag + "> at offset " + std::to_string(p));
          }
          value = decode_entities(std::string_view(s).substr(p + 1, close - p - 1));
          p = close + 1;
        } else {
          const std::size_t vb = p;
          while (p < s.size() && !std::isspace(static_cast<unsigned char>(s[p])) && s[p] != '>') ++p;
          value = decode_entities(std::string_view(s).substr(vb, p - vb));
        }
      }
      if (!name.empty()) el.attrs.emplace_back(std::move(name), std::move(value));
    }
    el.open_end = p;
    el.close_start = el.end = p;

    if (self_nesting_forbidden(el.tag) && stack.back()->tag == el.tag) {
      stack.back()->close_start = stack.back()->end = i;
      stack.pop_back();
    }

    const std::string tag = el.tag;
    Node* added = add_child(std::move(el));
    if (is_void_element(tag) || self_closing) {
      i = p;
      continue;
    }
    if (is_raw_text(tag)) {
      const std::string close_tag = "</" + tag;
      std::size_t j = p;
      while (true) {
        j = s.find("</", j);
        if (j == std::string::npos) throw ParseError("unterminated <" + tag + "> at offset " + std::to_string(i));
        if (util::to_lower(std::string_view(s).substr(j, close_tag.size())) == close_tag) break;
        j += 2;
      }
      const std::size_t gt = s.find('>', j);
      if (gt == std::string::npos) throw ParseError("unterminated end tag at offset " + std::to_string(j));
      added->text = s.substr(p, j - p);
      added->close_start = j;
      added->end = gt + 1;
      i = gt + 1;
      continue;
    }
    stack.push_back(added);
    i = p;
  }
  for (std::size_t k = stack.size(); k-- > 1;) {
    stack[k]->close_start = stack[k]->end = s.size();
  }
  return doc;
}

std::vector<const Node*> Document::find_all(const std::function<bool(const Node&)>& pred) const {
  std::vector<const Node*> out;
  std::vector<const Node*> todo{root_};
  while (!todo.empty()) {
    const Node* n = todo.back();
    todo.pop_back();
    if (n != root_ && pred(*n)) out.push_back(n);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) todo.push_back(*it);
  }
  return out;
}

std::vector<const Node*> Document::by_tag(std::string_view tag) const {
  return find_all([&](const Node& n) { return n.tag == tag; });
}

const Node* Document::by_id(std::string_view id) const {
  auto v = find_all([&](const Node& n) { return n.is_element() && n.attr("id") == std::string(id); });
  return v.empty() ? nullptr : v.front();
}

const Node* Document::first(std::string_view tag) const {
  auto v = by_tag(tag);
  return v.empty() ? nullptr : v.front();
}

} // namespace forge::html
