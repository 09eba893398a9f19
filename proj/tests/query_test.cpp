#include <doctest.h>

#include "ddse/query.hpp"

using namespace ddse;
using namespace ddse::query;

TEST_CASE("planner: displayed statement shapes") {
  CHECK(plan("SELECT DISTINCT T.y FROM T WHERE T.x = w").to_string() == "(Dsrch,(T,(T.x,w,T.y)))");
  CHECK(plan("INSERT INTO T (T.x,T.y) VALUE (w,v)").to_string() == "(ins,(T,(T.x,w,T.y,v)))");
  CHECK(plan("SELECT T2.y FROM T1 JOIN T2 ON T1.z = T2.z WHERE T1.x = w").to_string() ==
        "(join,(T1,T2,(T1.x,w,T1.z),(T2.z,0,T2.y)))");
  CHECK(plan("DELETE FROM T WHERE T.x = w AND T.y = v").to_string() == "(del,(T,(T.x,w,T.y,v)))");
  CHECK(plan("SELECT T.y FROM T WHERE T.x = w").to_string() == "(srch,(T,(T.x,w,T.y)))");
}

TEST_CASE("planner: lexical details") {
  const auto p = plan("insert into Crimes (street, iucr) values ('O''Hare St', 820);");
  CHECK(p.syn == Syn::ins);
  CHECK(p.key == ColumnRef{"Crimes", "street"});
  CHECK(p.value == ColumnRef{"Crimes", "iucr"});
  CHECK(to_string(p.keyword) == "O'Hare St");
  CHECK(to_string(p.literal) == "820");

  const auto j = plan("select T2.y from T1 join T2 on T2.id = T1.fk where T1.x = 'a b'");
  CHECK(j.value == ColumnRef{"T1", "fk"});
  CHECK(j.key2 == ColumnRef{"T2", "id"});
  CHECK(plan("SELECT DISTINCT T.y FROM T WHERE T.x = ''").keyword.empty());
}

TEST_CASE("planner: errors carry positions") {
  auto position = [](std::string_view s) -> std::size_t {
    try {
      plan(s);
    } catch (const ParseError& e) {
      return e.position();
    }
    FAIL("no error for: " << s);
    return 0;
  };
  CHECK(position("SELEC T.y FROM T WHERE T.x = w") == 0);
  CHECK(position("SELECT DISTINCT T.y FROM T WHERE T.x =") == 38);
  CHECK(position("SELECT T.y FROM T WHERE T.x = 'open") == 30);
  CHECK(position("SELECT U.y FROM T WHERE T.x = w") == 7);
  CHECK(position("SELECT T.y FROM T WHERE T.x = w extra") == 32);
  CHECK(position("SELECT y FROM T1 JOIN T2 ON T1.z = T2.z WHERE T1.x = w") == 7);
  CHECK(position("SELECT T1.y FROM T1 JOIN T2 ON T1.z = T2.z WHERE T1.x = w") == 7);
  CHECK(position("SELECT T.x FROM T WHERE T.x = w") == 7);
  CHECK(position("SELECT T.y FROM T WHERE T.x = w AND T.z = 1") == 32);
  CHECK(position("SELECT T.y FROM T WHERE T.x = 12abc") == 30);
  CHECK(position("SELECT T.y FROM T WHERE T.x = w #") == 32);
  CHECK_THROWS_AS(plan(""), ParseError);
}

TEST_CASE("planner: unparse round-trips") {
  for (const char* s : {"SELECT DISTINCT T.y FROM T WHERE T.x = w", "INSERT INTO T (x, y) VALUES ('it''s', 'a,b')",
                        "DELETE FROM T WHERE x = 1 AND y = ''", "SELECT y FROM T WHERE x = 'SELECT'",
                        "SELECT T2.y FROM T1 JOIN T2 ON T1.z = T2.z WHERE T1.x = 'w w'"}) {
    const auto p = plan(s);
    CHECK_MESSAGE(plan(p.unparse()) == p, s);
  }
  CHECK(plan("SELECT y FROM T WHERE x = w").unparse() == "SELECT T.y FROM T WHERE T.x = 'w'");
}
