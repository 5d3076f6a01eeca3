#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "genplan/errors.hpp"

namespace genplan::pddl {

// A parsed S-expression. PDDL is case-insensitive; atoms are lowercased.
struct SExpr {
  bool is_list = false;
  std::string atom;
  std::vector<SExpr> items;
  int line = 1;
  int column = 1;

  bool is_atom() const { return !is_list; }
  bool is_atom(std::string_view s) const { return !is_list && atom == s; }
  std::size_t size() const { return items.size(); }
  const SExpr& operator[](std::size_t i) const { return items[i]; }

  // True if this is a list whose first element is the atom `head`.
  bool has_head(std::string_view head) const {
    return is_list && !items.empty() && items[0].is_atom(head);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what, line, column);
  }
};

namespace detail {

class SExprReader {
 public:
  explicit SExprReader(std::string_view text) : text_(text) {}

  SExpr read_document() {
    skip_space();
    if (at_end()) throw SyntaxError("empty input", line_, col_);
    SExpr root = read();
    skip_space();
    if (!at_end()) throw SyntaxError("trailing input after top-level expression", line_, col_);
    return root;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }

  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (!at_end()) {
      char c = text_[pos_];
      if (c == ';') {
        while (!at_end() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SExpr read() {
    SExpr out;
    out.line = line_;
    out.column = col_;
    char c = text_[pos_];
    if (c == ')') throw SyntaxError("unexpected ')'", line_, col_);
    if (c == '(') {
      advance();
      out.is_list = true;
      for (;;) {
        skip_space();
        if (at_end()) throw SyntaxError("unterminated list", out.line, out.column);
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        out.items.push_back(read());
      }
      return out;
    }
    while (!at_end()) {
      c = text_[pos_];
      if (c == '(' || c == ')' || c == ';' || std::isspace(static_cast<unsigned char>(c))) break;
      out.atom.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(advance()))));
    }
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace detail

inline SExpr parse_sexpr(std::string_view text) {
  return detail::SExprReader(text).read_document();
}

}  // namespace genplan::pddl
