#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "rtree/dataset.hpp"
#include "toy_data.hpp"

using namespace rtree;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& contents)
      : path("tmp_" + name) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("libsvm: basic parse, 1-based indices, implicit zeros") {
  TempFile f("basic.libsvm",
             "1 1:0.5 3:2.0\n"
             "0 2:-1.5\n"
             "+1 1:1e-3\n");
  Dataset d = load_libsvm(f.path);
  CHECK(d.example_count() == 3);
  CHECK(d.feature_count() == 3);  // max index seen
  CHECK(d.label(0) == 1.0);
  CHECK(d.feature(0, 0) == 0.5);
  CHECK(d.feature(0, 1) == 0.0);
  CHECK(d.feature(0, 2) == 2.0);
  CHECK(d.feature(1, 1) == -1.5);
  CHECK(d.label(2) == 1.0);  // leading '+' accepted
  CHECK(d.feature(2, 0) == doctest::Approx(1e-3));
}

TEST_CASE("libsvm: blank lines are skipped, label-only rows are fine") {
  TempFile f("blank.libsvm", "\n1 2:4\n\n0\n");
  Dataset d = load_libsvm(f.path);
  CHECK(d.example_count() == 2);
  CHECK(d.feature_count() == 2);
  CHECK(d.feature(1, 0) == 0.0);
  CHECK(d.feature(1, 1) == 0.0);
}

TEST_CASE("libsvm: errors carry the line number") {
  TempFile decreasing("bad_order.libsvm", "1 1:0.5\n1 3:1 2:1\n");
  CHECK_THROWS_WITH_AS(load_libsvm(decreasing.path),
                       doctest::Contains(":2:"), std::runtime_error);

  TempFile dup("dup.libsvm", "0 2:1 2:3\n");
  CHECK_THROWS_AS(load_libsvm(dup.path), std::runtime_error);

  TempFile bad_tok("tok.libsvm", "1 1:abc\n");
  CHECK_THROWS_WITH_AS(load_libsvm(bad_tok.path), doctest::Contains(":1:"),
                       std::runtime_error);

  TempFile bad_label("label.libsvm", "one 1:2\n");
  CHECK_THROWS_AS(load_libsvm(bad_label.path), std::runtime_error);

  TempFile zero_idx("zeroidx.libsvm", "1 0:2\n");
  CHECK_THROWS_AS(load_libsvm(zero_idx.path), std::runtime_error);
}

TEST_CASE("libsvm: empty input is rejected") {
  TempFile empty("empty.libsvm", "");
  CHECK_THROWS_WITH_AS(load_libsvm(empty.path),
                       doctest::Contains("no examples"), std::runtime_error);
  TempFile blank("onlyblank.libsvm", "\n\n");
  CHECK_THROWS_AS(load_libsvm(blank.path), std::runtime_error);
}

TEST_CASE("libsvm: missing file") {
  CHECK_THROWS_AS(load_libsvm("does_not_exist.libsvm"), std::runtime_error);
}

TEST_CASE("scaler: maps train min/max to [0,1] and clamps unseen values") {
  Dataset train = fixtures::make_dataset({2.0, 10.0, 4.0, 20.0}, {0, 1}, 2);
  Scaler s = fit_scaler(train);
  CHECK(s.min == std::vector<double>{2.0, 10.0});
  CHECK(s.max == std::vector<double>{4.0, 20.0});

  Dataset scaled = apply_scaler(s, train);
  CHECK(scaled.feature(0, 0) == 0.0);
  CHECK(scaled.feature(1, 0) == 1.0);
  CHECK(scaled.feature(0, 1) == 0.0);
  CHECK(scaled.feature(1, 1) == 1.0);

  Dataset test = fixtures::make_dataset({0.0, 30.0, 3.0, 15.0}, {0, 1}, 2);
  Dataset t = apply_scaler(s, test);
  CHECK(t.feature(0, 0) == 0.0);  // below train min: clamped
  CHECK(t.feature(0, 1) == 1.0);  // above train max: clamped
  CHECK(t.feature(1, 0) == doctest::Approx(0.5));
  CHECK(t.feature(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("scaler: constant feature maps to 0") {
  Dataset train = fixtures::make_dataset({7.0, 1.0, 7.0, 2.0}, {0, 1}, 2);
  Dataset scaled = apply_scaler(fit_scaler(train), train);
  CHECK(scaled.feature(0, 0) == 0.0);
  CHECK(scaled.feature(1, 0) == 0.0);
}

TEST_CASE("scaler: huge outlier owns the top of the range") {
  TempFile f("outlier.libsvm", "0 2:1e9\n1 2:0\n");
  Dataset d = load_libsvm(f.path);
  Dataset scaled = apply_scaler(fit_scaler(d), d);
  CHECK(scaled.feature(0, 1) == 1.0);
  CHECK(scaled.feature(1, 1) == 0.0);
}

TEST_CASE("scaler: json round trip") {
  Scaler s{{0.0, -2.5}, {1.5, 3.125}};
  save_scaler(s, "tmp_scaler.json");
  Scaler t = load_scaler("tmp_scaler.json");
  CHECK(t.min == s.min);
  CHECK(t.max == s.max);
  std::remove("tmp_scaler.json");
}

TEST_CASE("robust config: scalar, per-feature, parsing, validation") {
  RobustConfig scalar(0.3);
  CHECK(scalar.epsilon(0) == 0.3);
  CHECK(scalar.epsilon(7) == 0.3);
  CHECK(scalar.any_positive());

  RobustConfig none;
  CHECK_FALSE(none.any_positive());

  RobustConfig per(std::vector<double>{0.1, 0.0, 0.2});
  CHECK(per.epsilon(1) == 0.0);
  CHECK(per.epsilon(2) == 0.2);
  CHECK_NOTHROW(per.check_dimension(3));
  CHECK_THROWS_AS(per.check_dimension(2), std::invalid_argument);
  CHECK_NOTHROW(scalar.check_dimension(99));  // scalars fit any width

  RobustConfig parsed = RobustConfig::parse("0.25");
  CHECK(parsed.is_scalar());
  CHECK(parsed.scalar_value() == 0.25);
  RobustConfig parsed_list = RobustConfig::parse("0.1,0.2,0.3");
  CHECK_FALSE(parsed_list.is_scalar());
  CHECK(parsed_list.epsilon(2) == 0.3);

  CHECK_THROWS_AS(RobustConfig(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(RobustConfig::parse("0.1,,0.3"), std::invalid_argument);
  CHECK_THROWS_AS(RobustConfig::parse("abc"), std::invalid_argument);
}
