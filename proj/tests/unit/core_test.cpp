#include <gtest/gtest.h>

#include <set>

#include "hsx/core/container.hpp"
#include "hsx/core/keyvalue.hpp"
#include "hsx/core/rng.hpp"

using namespace hsx;

TEST(Rng, SameSeedAndStreamReproduce) {
  CounterRng a(42, stream("x")), b(42, stream("x"));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, StreamsAndSeedsDiffer) {
  CounterRng a(42, stream("x")), b(42, stream("y")), c(43, stream("x"));
  const auto va = a();
  EXPECT_NE(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(stream("x").child(0).value, stream("x").child(1).value);
  EXPECT_EQ(stream("x").child("a").value, stream("x").child("a").value);
}

TEST(Rng, OutputIndependentOfOtherStreamsDraws) {
  CounterRng a(7, stream("s"));
  const auto first = a();
  CounterRng other(7, stream("t"));
  for (int i = 0; i < 50; ++i) other();
  CounterRng again(7, stream("s"));
  EXPECT_EQ(again(), first);
}

TEST(Rng, UniformAndBelowRanges) {
  CounterRng r(1, stream("u"));
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ASSERT_LT(r.below(7), 7u);
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
  CounterRng r(2, stream("n"));
  const int n = 40000;
  double m = 0, s = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    m += z;
    s += z * z;
  }
  m /= n;
  EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s / n - m * m, 1.0, 0.03);
}

TEST(Rng, PermutationIsAPermutation) {
  CounterRng r(3, stream("p"));
  const auto p = r.permutation(100);
  EXPECT_EQ(std::set<std::size_t>(p.begin(), p.end()).size(), 100u);
  EXPECT_EQ(*std::max_element(p.begin(), p.end()), 99u);
}

TEST(Hash, KnownSha256Vectors) {
  EXPECT_EQ(to_hex(sha256(std::string_view("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(to_hex(sha256(std::string_view(""))),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  Sha256 h;
  h.update(std::string_view("ab"));
  h.update(std::string_view("c"));
  EXPECT_EQ(h.finish(), sha256(std::string_view("abc")));
}

TEST(KeyValue, ParsesSectionsAndComments) {
  const auto doc = KvDocument::parse("# comment\nname = x \n\n[train]\nlr = 0.001\nbatch=4\nflag = true\n");
  EXPECT_EQ(doc.root().get("name"), "x");
  ASSERT_NE(doc.section("train"), nullptr);
  EXPECT_DOUBLE_EQ(doc.section("train")->get_double("lr"), 0.001);
  EXPECT_EQ(doc.section("train")->get_int("batch"), 4);
  EXPECT_TRUE(doc.section("train")->get_bool("flag", false));
  EXPECT_EQ(doc.section("missing"), nullptr);
  EXPECT_EQ(doc.section_or_empty("missing").get("k", "d"), "d");
}

TEST(KeyValue, ErrorsAreConfigErrors) {
  for (const char* bad : {"[train\n", "novalue\n", " = 3\n"}) {
    try {
      KvDocument::parse(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
  }
  const auto doc = KvDocument::parse("n = abc\n");
  EXPECT_THROW(doc.root().get_int("n"), Error);
  EXPECT_THROW(doc.root().get("absent"), Error);
}

TEST(KeyValue, CanonicalTextRoundTrips) {
  KvDocument d;
  d.root().set("b", "2");
  d.root().set("a", "1");
  d.add_section("s").set("k", "v");
  const auto text = d.to_string();
  EXPECT_EQ(KvDocument::parse(text).to_string(), text);
  EXPECT_LT(text.find("a = 1"), text.find("b = 2"));
}

TEST(Container, RoundTripAndHash) {
  const std::vector<std::uint8_t> payload{1, 2, 3, 4, 5};
  const auto bytes = wrap_container("TEST", 3, payload);
  ASSERT_EQ(bytes.size(), 4u + 4u + 5u + 32u);
  const auto v = open_container(bytes, "TEST", 3);
  EXPECT_EQ(std::vector<std::uint8_t>(v.payload.begin(), v.payload.end()), payload);
  EXPECT_EQ(v.payload_offset, 8u);
  EXPECT_EQ(v.hash, sha256(payload));
}

TEST(Container, CorruptionsReportOffsets) {
  const std::vector<std::uint8_t> payload(16, 7);
  const auto good = wrap_container("TEST", 1, payload);
  auto expect_offset = [](std::vector<std::uint8_t> b, std::uint64_t off) {
    try {
      open_container(b, "TEST", 1);
      FAIL() << "accepted corrupt container";
    } catch (const FormatError& e) {
      EXPECT_EQ(e.offset(), off) << e.what();
    }
  };
  auto b = good;
  b[0] = 'X';
  expect_offset(b, 0);
  b = good;
  b[4] = 9;
  expect_offset(b, 4);
  b = good;
  b[10] ^= 1;
  expect_offset(b, 8 + 16);
  expect_offset(std::vector<std::uint8_t>(good.begin(), good.begin() + 20), 8);
  expect_offset({}, 0);
}

TEST(Container, StoredArraysRoundTrip) {
  tensor::ParamList<double> p;
  p.add("a", tensor::Tensor<double>({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
  p.add("b", tensor::Tensor<double>({1}, 0.5));
  ByteWriter w;
  for (const auto& a : store_all(p)) write_array(w, a);
  const auto bytes = wrap_container("ARRS", 1, w.take());
  const auto view = open_container(bytes, "ARRS", 1);
  PayloadReader r(view);
  std::vector<StoredArray> back{read_array(r), read_array(r)};
  EXPECT_EQ(back, store_all(p));

  tensor::ParamList<double> q;
  q.add("a", tensor::Tensor<double>({2, 3}));
  q.add("b", tensor::Tensor<double>({1}));
  restore_all(q, back);
  EXPECT_EQ(params_hash(q), params_hash(p));
  q.items[1].second[0] = 0.25;
  EXPECT_NE(params_hash(q), params_hash(p));

  tensor::ParamList<double> wrong;
  wrong.add("a", tensor::Tensor<double>({3, 2}));
  wrong.add("b", tensor::Tensor<double>({1}));
  EXPECT_THROW(restore_all(wrong, back), Error);
}

TEST(Errors, ExitCodes) {
  EXPECT_EQ(exit_code(ErrorKind::Config), 2);
  EXPECT_EQ(exit_code(ErrorKind::Data), 3);
  EXPECT_EQ(exit_code(ErrorKind::Format), 3);
  EXPECT_EQ(exit_code(ErrorKind::Training), 4);
  EXPECT_EQ(exit_code(ErrorKind::Evaluation), 5);
  const TrainingError t("diverged", 12);
  EXPECT_EQ(t.last_finite_step(), 12);
  EXPECT_NE(std::string(t.what()).find("12"), std::string::npos);
}
