#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddse/bytes.hpp"
#include "ddse/error.hpp"

// Query planner: turns one of the supported statements into the pair
// (syn, m) that selects a construction and its operands.
//
//   INSERT INTO T (T.x, T.y) VALUE (w, v)
//   DELETE FROM T WHERE T.x = w AND T.y = v
//   SELECT DISTINCT T.y FROM T WHERE T.x = w
//   SELECT T.y FROM T WHERE T.x = w
//   SELECT T2.y FROM T1 JOIN T2 ON T1.z = T2.z WHERE T1.x = w
//
// Keywords are case-insensitive, VALUES is accepted for VALUE and a trailing
// semicolon is optional. Literals are single-quoted strings ('' escapes a
// quote), bare integers, or bare words; all are carried verbatim as bytes.
namespace ddse::query {

class ParseError : public InvalidArgument {
 public:
  ParseError(const std::string& message, std::size_t position);
  /// Byte offset into the statement.
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

enum class Syn { ins, del, dsrch, srch, join };

const char* syn_name(Syn s);

struct ColumnRef {
  std::string table;
  std::string column;

  std::string qualified() const { return table + "." + column; }
  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

struct Plan {
  Syn syn = Syn::dsrch;
  std::string table;
  ColumnRef key;    // T.x, or T1.x for a join
  Bytes keyword;    // w
  ColumnRef value;  // T.y, or T1.z for a join
  Bytes literal;    // v for ins/del

  // Join only: the second stage (T2.z, 0, T2.y).
  std::string table2;
  ColumnRef key2;
  ColumnRef value2;

  /// The syntax tuple, e.g. (Dsrch,(T,(T.x,w,T.y))).
  std::string to_string() const;
  /// A canonical statement that plans back to the same Plan.
  std::string unparse() const;

  friend bool operator==(const Plan&, const Plan&) = default;
};

/// Throws ParseError with the offending position.
Plan plan(std::string_view statement);

/// Quotes a literal for unparse: 'it''s'.
std::string quote(ByteView literal);

}  // namespace ddse::query
