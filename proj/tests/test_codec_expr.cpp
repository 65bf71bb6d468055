#include <gtest/gtest.h>

#include "forge/codec.hpp"
#include "forge/errors.hpp"
#include "forge/expr.hpp"
#include "forge/judge.hpp"
#include "forge/util.hpp"

#include <random>

using namespace forge;
using nlohmann::json;

namespace {

// Plain table-driven encoder, written independently of the library codec.
std::string reference_b64(const std::string& in) {
  static const char* kAlpha = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  while (i + 2 < in.size()) {
    const unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                       (static_cast<unsigned char>(in[i + 1]) << 8) |
                       static_cast<unsigned char>(in[i + 2]);
    out += kAlpha[(v >> 18) & 63];
    out += kAlpha[(v >> 12) & 63];
    out += kAlpha[(v >> 6) & 63];
    out += kAlpha[v & 63];
    i += 3;
  }
  const std::size_t rest = in.size() - i;
  if (rest == 1) {
    const unsigned v = static_cast<unsigned char>(in[i]) << 16;
    out += kAlpha[(v >> 18) & 63];
    out += kAlpha[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                       (static_cast<unsigned char>(in[i + 1]) << 8);
    out += kAlpha[(v >> 18) & 63];
    out += kAlpha[(v >> 12) & 63];
    out += kAlpha[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string random_utf8(std::mt19937& rng) {
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<int> kind(0, 3);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    switch (kind(rng)) {
    case 0:
      s += static_cast<char>(std::uniform_int_distribution<int>(32, 126)(rng));
      break;
    case 1:
      s += "\xC3\xA9";  // e-acute
      break;
    case 2:
      s += "\xE2\x82\xAC";  // euro sign
      break;
    default:
      s += "\xF0\x9F\x8C\xB9";  // rose
      break;
    }
  }
  return s;
}

JudgeProgram wedding_program() {
  return JudgeProgram::from_json(json::parse(util::read_file(FORGE_FIXTURE_DIR "/wedding/judge.json")));
}

} // namespace

TEST(Codec, PublishedFixtures) {
  EXPECT_EQ(encode_secret("GEG-2026-05841"), "R0VHLTIwMjYtMDU4NDE=");
  EXPECT_EQ(encode_secret("11440.00"), "MTE0NDAuMDA=");
  EXPECT_EQ(encode_secret("2026-05-16"), "MjAyNi0wNS0xNg==");
  EXPECT_EQ(decode_secret("MjAyNi0wNS0xNg=="), "2026-05-16");
  EXPECT_EQ(decode_secret("R0VHLTIwMjYtMDUyOTQ="), "GEG-2026-05294");
  EXPECT_EQ(encode_secret(""), "");
  EXPECT_EQ(decode_secret(""), "");
}

TEST(Codec, MalformedInputRejected) {
  EXPECT_THROW(decode_secret("!!!"), DecodeError);
  EXPECT_THROW(decode_secret("!!!!"), DecodeError);
  EXPECT_THROW(decode_secret("QUJD="), DecodeError);
  EXPECT_THROW(decode_secret("Q=JD"), DecodeError);
}

TEST(Codec, RoundTripProperty) {
  std::mt19937 rng(20260516);
  for (int i = 0; i < 10000; ++i) {
    const std::string s = random_utf8(rng);
    const std::string enc = encode_secret(s);
    ASSERT_EQ(enc, reference_b64(s));
    ASSERT_EQ(decode_secret(enc), s);
  }
}

TEST(Expr, CalendarFunctions) {
  const json state = {{"d", "2026-05-16"}, {"f", "2026-05-01"}};
  const expr::Env env{&state, nullptr, nullptr};
  EXPECT_EQ(expr::Expr::parse("weekday(d)").eval(env), "Saturday");
  EXPECT_EQ(expr::Expr::parse("weekday(f)").eval(env), "Friday");
  EXPECT_TRUE(expr::Expr::parse("date_between(d, \"2026-05-15\", \"2026-05-19\")").test(env));
  EXPECT_FALSE(expr::Expr::parse("date_between(f, \"2026-05-15\", \"2026-05-19\")").test(env));
  EXPECT_EQ(expr::Expr::parse("day(d) + 1").eval(env), 17.0);
  EXPECT_TRUE(expr::Expr::parse("weekday(\"05/16/2026\") == null").test(env));
}

TEST(Expr, CoercionAndOperators) {
  const json state = {{"guests", "80"}, {"cat", "Premium"}};
  const json consts = {{"rates", {{"premium", 90}}}, {"list", {1, 2, 3}}};
  const expr::Env env{&state, &consts, nullptr};
  EXPECT_TRUE(expr::Expr::parse("guests == 80").test(env));
  EXPECT_FALSE(expr::Expr::parse("guests != 80").test(env));
  EXPECT_EQ(expr::Expr::parse("guests * lookup($rates, lower(cat))").eval(env), 7200.0);
  EXPECT_TRUE(expr::Expr::parse("2 in $list and not (4 in $list)").test(env));
  EXPECT_EQ(expr::Expr::parse("fixed(10400 * 1.1, 2)").eval(env), "11440.00");
  EXPECT_EQ(expr::Expr::parse("missing + 1").eval(env), nullptr);
  EXPECT_EQ(expr::Expr::parse("1 / 0").eval(env), nullptr);
  EXPECT_EQ(expr::Expr::parse("if(guests > 100, \"big\", \"small\")").eval(env), "small");
  EXPECT_EQ(expr::Expr::parse("concat(\"GEG-\", 2026)").eval(env), "GEG-2026");
}

TEST(Expr, ParseErrors) {
  EXPECT_THROW(expr::Expr::parse("a =="), ParseError);
  EXPECT_THROW(expr::Expr::parse("nosuch(1)"), ParseError);
  EXPECT_THROW(expr::Expr::parse("weekday(1, 2)"), ParseError);
  EXPECT_THROW(expr::Expr::parse("\"open"), ParseError);
  EXPECT_THROW(expr::Expr::parse("a ? b"), ParseError);
}

TEST(Expr, SourceRoundTrip) {
  const char* sources[] = {
      "a and (b or c)",
      "not a == b",
      "-(x + 1) * 2",
      "x - (y - z)",
      "date_between(date, \"2026-05-15\", \"2026-05-19\") and weekday(date) == \"Saturday\"",
      "[1, 2.5, \"q\\\"x\"]",
      "$tiers",
  };
  for (const char* s : sources) {
    const auto e = expr::Expr::parse(s);
    EXPECT_EQ(expr::Expr::parse(e.to_source()).to_source(), e.to_source()) << s;
    EXPECT_EQ(expr::Expr::parse(e.to_source(true)).to_source(), e.to_source()) << s;
  }
  EXPECT_EQ(expr::Expr::parse("a and (b or c)").to_source(), "a and (b or c)");
  EXPECT_EQ(expr::Expr::parse("x - (y - z)").to_source(), "x - (y - z)");
}

TEST(Judge, WeddingTotals) {
  const auto p = wedding_program();
  const json state = {{"date", "2026-05-16"}, {"guests", "80"}, {"catering", "premium"}};
  const json d = p.derive_all(state);
  EXPECT_EQ(d["venue_rental"], 3200.0);
  EXPECT_EQ(d["catering_total"], 7200.0);
  EXPECT_EQ(d["service_fee"], 1040.0);
  EXPECT_EQ(d["total_display"], "11440.00");
  EXPECT_EQ(p.match(state), kCorrectOutcome);
}

TEST(Judge, ObfuscationPreservesOutcomes) {
  const auto p = wedding_program();
  const auto shipped =
      JudgeProgram::from_json(p.obfuscated({"total_display"}).to_json(/*encode_strings=*/true));
  const std::string dumped = shipped.to_json(true).dump();
  EXPECT_EQ(dumped.find("Saturday"), std::string::npos);
  EXPECT_EQ(dumped.find("venue_rental"), std::string::npos);
  EXPECT_NE(dumped.find("total_display"), std::string::npos);

  std::mt19937 rng(3);
  const char* caterings[] = {"none", "standard", "premium", "luxe", "Premium"};
  for (int i = 0; i < 2000; ++i) {
    char date[16];
    std::snprintf(date, sizeof date, "2026-05-%02d", 1 + static_cast<int>(rng() % 31));
    const json state = {{"date", date},
                        {"guests", std::to_string(70 + rng() % 20)},
                        {"catering", caterings[rng() % 5]}};
    ASSERT_EQ(p.match(state), shipped.match(state));
    ASSERT_EQ(p.derive_all(state)["total_display"], shipped.derive_all(state)["total_display"]);
  }
}

TEST(Judge, NoMatchIsConfigurationFault) {
  JudgeProgram p;
  p.rules.push_back({expr::Expr::parse("false"), "x"});
  EXPECT_THROW(p.match(json::object()), ConfigError);
}
