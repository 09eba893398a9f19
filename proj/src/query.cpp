#include "ddse/query.hpp"

#include <cctype>

namespace ddse::query {

namespace {

enum class Tok { ident, string, integer, punct, end };

struct Token {
  Tok kind;
  std::string text;  // identifier, literal bytes, or the punctuation char
  std::size_t pos;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (ident_start(c)) {
      const auto start = i;
      while (i < s.size() && ident_char(s[i])) ++i;
      out.push_back({Tok::ident, std::string(s.substr(start, i - start)), start});
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      const auto start = i;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      if (i < s.size() && ident_start(s[i])) throw ParseError("malformed number", start);
      out.push_back({Tok::integer, std::string(s.substr(start, i - start)), start});
    } else if (c == '\'') {
      const auto start = i++;
      std::string text;
      for (;;) {
        if (i >= s.size()) throw ParseError("unterminated string literal", start);
        if (s[i] == '\'') {
          if (i + 1 < s.size() && s[i + 1] == '\'') {
            text += '\'';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        text += s[i++];
      }
      out.push_back({Tok::string, std::move(text), start});
    } else if (c == '(' || c == ')' || c == ',' || c == '=' || c == ';') {
      out.push_back({Tok::punct, std::string(1, c), i++});
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
  }
  out.push_back({Tok::end, "", s.size()});
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::toupper(static_cast<unsigned char>(a[i])) != std::toupper(static_cast<unsigned char>(b[i]))) return false;
  return true;
}

class Parser {
 public:
  explicit Parser(std::string_view s) : toks_(lex(s)) {}

  Plan parse() {
    Plan p;
    if (accept_kw("INSERT")) {
      parse_insert(p);
    } else if (accept_kw("DELETE")) {
      parse_delete(p);
    } else if (accept_kw("SELECT")) {
      parse_select(p);
    } else {
      fail("expected INSERT, DELETE or SELECT");
    }
    accept_punct(';');
    if (peek().kind != Tok::end) fail("unexpected trailing input");
    return p;
  }

 private:
  // A column as written, resolved once the statement's tables are known.
  struct RawColumn {
    std::string text;
    std::size_t pos;
  };

  const Token& peek() const { return toks_[i_]; }
  [[noreturn]] void fail(const std::string& msg) const {
    const auto& t = peek();
    throw ParseError(msg + (t.kind == Tok::end ? " at end of statement" : ", found '" + t.text + "'"), t.pos);
  }

  bool is_kw(std::string_view kw) const { return peek().kind == Tok::ident && iequals(peek().text, kw); }
  bool accept_kw(std::string_view kw) {
    if (!is_kw(kw)) return false;
    ++i_;
    return true;
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw)) fail("expected " + std::string(kw));
  }
  bool accept_punct(char c) {
    if (peek().kind != Tok::punct || peek().text[0] != c) return false;
    ++i_;
    return true;
  }
  void expect_punct(char c) {
    if (!accept_punct(c)) fail(std::string("expected '") + c + "'");
  }

  static bool reserved(std::string_view s) {
    for (auto kw : {"INSERT", "INTO", "VALUE", "VALUES", "DELETE", "FROM", "WHERE", "AND", "SELECT", "DISTINCT",
                    "JOIN", "ON"})
      if (iequals(s, kw)) return true;
    return false;
  }

  std::string table_name() {
    if (peek().kind != Tok::ident || reserved(peek().text)) fail("expected a table name");
    if (peek().text.find('.') != std::string::npos) fail("table names cannot contain '.'");
    return toks_[i_++].text;
  }

  RawColumn column() {
    if (peek().kind != Tok::ident || reserved(peek().text)) fail("expected a column name");
    const auto& t = toks_[i_++];
    return {t.text, t.pos};
  }

  Bytes literal() {
    const auto& t = peek();
    if (t.kind == Tok::string || t.kind == Tok::integer || (t.kind == Tok::ident && !reserved(t.text))) {
      ++i_;
      return to_bytes(t.text);
    }
    fail("expected a literal");
  }

  // Resolves `c` against the statement's tables. Unqualified names are
  // allowed only when there is a single table.
  static ColumnRef resolve(const RawColumn& c, const std::vector<std::string>& tables) {
    for (const auto& t : tables) {
      if (c.text.size() > t.size() + 1 && c.text.compare(0, t.size(), t) == 0 && c.text[t.size()] == '.')
        return {t, c.text.substr(t.size() + 1)};
    }
    if (c.text.find('.') == std::string::npos) {
      if (tables.size() == 1) return {tables[0], c.text};
      throw ParseError("column '" + c.text + "' must be qualified with its table", c.pos);
    }
    throw ParseError("column '" + c.text + "' does not belong to a table in this statement", c.pos);
  }

  static ColumnRef resolve_in(const RawColumn& c, const std::vector<std::string>& tables, const std::string& table) {
    auto ref = resolve(c, tables);
    if (ref.table != table) throw ParseError("column '" + c.text + "' must belong to " + table, c.pos);
    return ref;
  }

  void parse_insert(Plan& p) {
    p.syn = Syn::ins;
    expect_kw("INTO");
    p.table = table_name();
    expect_punct('(');
    const auto k = column();
    expect_punct(',');
    const auto v = column();
    expect_punct(')');
    if (!accept_kw("VALUE")) expect_kw("VALUES");
    expect_punct('(');
    p.keyword = literal();
    expect_punct(',');
    p.literal = literal();
    expect_punct(')');
    p.key = resolve(k, {p.table});
    p.value = resolve(v, {p.table});
    check_distinct(p, v);
  }

  void parse_delete(Plan& p) {
    p.syn = Syn::del;
    expect_kw("FROM");
    p.table = table_name();
    expect_kw("WHERE");
    const auto k = column();
    expect_punct('=');
    p.keyword = literal();
    expect_kw("AND");
    const auto v = column();
    expect_punct('=');
    p.literal = literal();
    p.key = resolve(k, {p.table});
    p.value = resolve(v, {p.table});
    check_distinct(p, v);
  }

  void parse_select(Plan& p) {
    const bool distinct = accept_kw("DISTINCT");
    const auto out = column();
    expect_kw("FROM");
    p.table = table_name();
    if (accept_kw("JOIN")) {
      if (distinct) throw ParseError("SELECT DISTINCT with JOIN is not supported", toks_[i_ - 1].pos);
      p.syn = Syn::join;
      p.table2 = table_name();
      if (p.table2 == p.table) fail("a table cannot be joined with itself");
      expect_kw("ON");
      const auto a = column();
      expect_punct('=');
      const auto b = column();
      expect_kw("WHERE");
      const auto k = column();
      expect_punct('=');
      p.keyword = literal();
      const std::vector<std::string> tables{p.table, p.table2};
      auto ra = resolve(a, tables);
      auto rb = resolve(b, tables);
      if (ra.table == rb.table) throw ParseError("join condition must relate the two tables", a.pos);
      if (ra.table != p.table) std::swap(ra, rb);
      p.value = ra;
      p.key2 = rb;
      p.key = resolve_in(k, tables, p.table);
      p.value2 = resolve_in(out, tables, p.table2);
      if (p.key == p.value) throw ParseError("keyword and join columns must differ", k.pos);
      if (p.key2 == p.value2) throw ParseError("join and selected columns must differ", out.pos);
      return;
    }
    p.syn = distinct ? Syn::dsrch : Syn::srch;
    expect_kw("WHERE");
    const auto k = column();
    expect_punct('=');
    p.keyword = literal();
    p.key = resolve(k, {p.table});
    p.value = resolve(out, {p.table});
    check_distinct(p, out);
  }

  static void check_distinct(const Plan& p, const RawColumn& c) {
    if (p.key == p.value) throw ParseError("keyword and value columns must differ", c.pos);
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

std::string tuple_literal(ByteView b) { return ddse::to_string(b); }

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t position)
    : InvalidArgument(message + " (at position " + std::to_string(position) + ")"), position_(position) {}

const char* syn_name(Syn s) {
  switch (s) {
    case Syn::ins: return "ins";
    case Syn::del: return "del";
    case Syn::dsrch: return "Dsrch";
    case Syn::srch: return "srch";
    case Syn::join: return "join";
  }
  return "?";
}

std::string quote(ByteView literal) {
  std::string out = "'";
  for (char c : ddse::to_string(literal)) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string Plan::to_string() const {
  std::string s = std::string("(") + syn_name(syn) + ",(" + table + ",";
  switch (syn) {
    case Syn::ins:
    case Syn::del:
      s += "(" + key.qualified() + "," + tuple_literal(keyword) + "," + value.qualified() + "," +
           tuple_literal(literal) + ")";
      break;
    case Syn::dsrch:
    case Syn::srch:
      s += "(" + key.qualified() + "," + tuple_literal(keyword) + "," + value.qualified() + ")";
      break;
    case Syn::join:
      s += table2 + ",(" + key.qualified() + "," + tuple_literal(keyword) + "," + value.qualified() + "),(" +
           key2.qualified() + ",0," + value2.qualified() + ")";
      break;
  }
  return s + "))";
}

std::string Plan::unparse() const {
  switch (syn) {
    case Syn::ins:
      return "INSERT INTO " + table + " (" + key.qualified() + ", " + value.qualified() + ") VALUE (" +
             quote(keyword) + ", " + quote(literal) + ")";
    case Syn::del:
      return "DELETE FROM " + table + " WHERE " + key.qualified() + " = " + quote(keyword) + " AND " +
             value.qualified() + " = " + quote(literal);
    case Syn::dsrch:
    case Syn::srch:
      return std::string("SELECT ") + (syn == Syn::dsrch ? "DISTINCT " : "") + value.qualified() + " FROM " + table +
             " WHERE " + key.qualified() + " = " + quote(keyword);
    case Syn::join:
      return "SELECT " + value2.qualified() + " FROM " + table + " JOIN " + table2 + " ON " + value.qualified() +
             " = " + key2.qualified() + " WHERE " + key.qualified() + " = " + quote(keyword);
  }
  return {};
}

Plan plan(std::string_view statement) { return Parser(statement).parse(); }

}  // namespace ddse::query
