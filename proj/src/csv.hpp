// SPDX-License-Identifier: Apache-2.0

// Minimal RFC-4180 reading/writing: ',' separator, LF line endings, fields
// quoted only when they contain a separator, quote or line break.

#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace servo::csv {

inline void write_field(std::ostream& out, std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads one record; returns false at end of input. `line` receives the
  // 1-based physical line where the record starts. Throws std::runtime_error
  // on an unterminated quote.
  bool next(std::vector<std::string>& fields, long& line) {
    fields.clear();
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) return false;
    line = ++line_;
    std::string field;
    bool quoted = false;
    bool at_field_start = true;
    while (true) {
      if (c == std::char_traits<char>::eof()) {
        if (quoted) throw std::runtime_error("unterminated quoted field");
        fields.push_back(std::move(field));
        return true;
      }
      const char ch = static_cast<char>(c);
      if (quoted) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            field.push_back('"');
            in_.get();
          } else {
            quoted = false;
          }
        } else {
          if (ch == '\n') ++line_;
          field.push_back(ch);
        }
      } else if (ch == '"' && at_field_start) {
        quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
        at_field_start = true;
        c = in_.get();
        continue;
      } else if (ch == '\n') {
        fields.push_back(std::move(field));
        return true;
      } else if (ch != '\r') {
        field.push_back(ch);
      }
      at_field_start = false;
      c = in_.get();
    }
  }

 private:
  std::istream& in_;
  long line_ = 0;
};

}  // namespace servo::csv
