#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "aigi/dire.hpp"
#include "aigi/table_file.hpp"
#include "test_support.hpp"

using namespace aigi;

namespace {

ImageArray uniform_noise(Rng& rng, int res = 32) {
  ImageArray img(res, res);
  for (auto& v : img.values) v = rng.uniform(-1, 1);
  return img;
}

DiffusionOracle shifting_oracle(double shift) {
  return DiffusionOracle{"shift", 1, 0, [](const ImageArray& x) { return x; },
                         [shift](const ImageArray& x) {
                           ImageArray y = x;
                           for (auto& v : y.values) v += shift;
                           return y;
                         }};
}

}  // namespace

TEST_SUITE("dire") {
  TEST_CASE("identity oracle gives a zero map") {
    Rng rng(1);
    const auto x = uniform_noise(rng);
    const auto map = compute_dire(x, identity_oracle());
    CHECK(map.height == 32);
    for (double v : map.values) CHECK(v == 0.0);
    CHECK(dire_score(map) == 0.0);
  }

  TEST_CASE("constant round-trip offset") {
    Rng rng(2);
    const auto map = compute_dire(uniform_noise(rng, 8), shifting_oracle(0.1));
    for (double v : map.values) CHECK(v == doctest::Approx(0.1));
    CHECK(dire_score(map) == doctest::Approx(0.1));
    CHECK(dire_score(compute_dire(uniform_noise(rng, 8), shifting_oracle(-0.1))) == doctest::Approx(0.1));
  }

  TEST_CASE("score is the mean") {
    CHECK(dire_score(DireMap{2, 2, {0.0, 0.0, 0.0, 0.0}}) == 0.0);
    CHECK(dire_score(DireMap{2, 2, {0.1, 0.1, 0.1, 0.1}}) == doctest::Approx(0.1));
    CHECK(dire_score(DireMap{2, 2, {0.0, 0.2, 0.4, 0.6}}) == doctest::Approx(0.3));
  }

  TEST_CASE("score is monotone") {
    Rng rng(3);
    DireMap m{4, 4, std::vector<double>(16)};
    for (auto& v : m.values) v = rng.uniform();
    const double base = dire_score(m);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      DireMap up = m;
      up.values[i] += rng.uniform();
      CHECK(dire_score(up) >= base);
    }
  }

  TEST_CASE("dire is symmetric in its difference") {
    Rng rng(4);
    const auto x = uniform_noise(rng, 8), y = uniform_noise(rng, 8);
    auto to = [](const ImageArray& target) {
      return DiffusionOracle{"const", 1, 0, [](const ImageArray& a) { return a; },
                             [target](const ImageArray&) { return target; }};
    };
    CHECK(compute_dire(x, to(y)).values == compute_dire(y, to(x)).values);
  }

  TEST_CASE("oracle errors") {
    DiffusionOracle broken{"broken", 1, 0, {}, {}};
    Rng rng(5);
    CHECK_THROWS_AS(compute_dire(uniform_noise(rng, 8), broken), Error);
    CHECK_THROWS_AS(compute_dire(uniform_noise(rng, 8), identity_oracle(32)), Error);
    DiffusionOracle shrink{"shrink", 1, 0, [](const ImageArray& a) { return a; },
                           [](const ImageArray&) { return ImageArray(4, 4); }};
    CHECK_THROWS_AS(compute_dire(uniform_noise(rng, 8), shrink), Error);
  }

  TEST_CASE("calibration picks the midpoint") {
    const std::vector<double> scores{0.01, 0.5, 0.02, 0.6};
    const std::vector<Verdict> labels{Verdict::Fake, Verdict::Real, Verdict::Fake, Verdict::Real};
    const auto cal = calibrate_threshold(scores, labels);
    CHECK(cal.threshold == doctest::Approx(0.26));
    CHECK(cal.balanced_accuracy == 1.0);

    // Exhaustive sweep oracle: every threshold in (0.02, 0.5) separates perfectly.
    for (double t = 0.0; t <= 0.7; t += 0.005) {
      const bool inside = t > 0.02 && t <= 0.5;
      CHECK((balanced_accuracy(scores, labels, t) == 1.0) == inside);
    }
  }

  TEST_CASE("interleaved scores warn") {
    const std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
    const std::vector<Verdict> labels{Verdict::Real, Verdict::Fake, Verdict::Real, Verdict::Fake};
    testing::LogCapture log;
    const auto cal = calibrate_threshold(scores, labels);
    CHECK(cal.balanced_accuracy == 0.5);
    CHECK(log.warnings.size() == 1);
  }

  TEST_CASE("tied scores carry no information") {
    const std::vector<double> scores{0.3, 0.3, 0.3, 0.3};
    const std::vector<Verdict> labels{Verdict::Fake, Verdict::Real, Verdict::Fake, Verdict::Real};
    testing::LogCapture log;
    CHECK(calibrate_threshold(scores, labels).balanced_accuracy == 0.5);
    CHECK_FALSE(log.warnings.empty());
  }

  TEST_CASE("calibration needs both labels") {
    const std::vector<double> scores{0.1, 0.2};
    const std::vector<Verdict> labels{Verdict::Fake, Verdict::Fake};
    CHECK_THROWS_AS(calibrate_threshold(scores, labels), Error);
  }

  TEST_CASE("threshold boundary") {
    CHECK(verdict_for_score(0.0, 0.26) == Verdict::Fake);
    CHECK(verdict_for_score(0.5, 0.26) == Verdict::Real);
    CHECK(verdict_for_score(0.26, 0.26) == Verdict::Real);
    Rng rng(6);
    const auto x = uniform_noise(rng, 8);
    CHECK(classify_dire(x, identity_oracle(), 0.26) == Verdict::Fake);
    CHECK(classify_dire(x, shifting_oracle(0.5), 0.26) == Verdict::Real);
    const ImageArray zeros(8, 8);
    CHECK(classify_dire(zeros, shifting_oracle(0.25), 0.25) == Verdict::Real);
    CHECK(classify_dire(zeros, shifting_oracle(0.25), 0.25 + 1e-12) == Verdict::Fake);
    const ScoreHead always_fake = [](double) { return Verdict::Fake; };
    CHECK(classify_dire(x, shifting_oracle(0.9), always_fake) == Verdict::Fake);
  }

  TEST_CASE("decisions survive a monotone transform") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
      const double s = rng.uniform(0, 2), t = rng.uniform(0, 2);
      auto f = [](double v) { return std::exp(3 * v) + v; };
      CHECK(verdict_for_score(s, t) == verdict_for_score(f(s), f(t)));
    }
  }

  TEST_CASE("threshold sweep auc") {
    CHECK(threshold_sweep_auc(std::vector<double>{0.1, 0.2}, std::vector<double>{0.5, 0.6}) == 1.0);
    CHECK(threshold_sweep_auc(std::vector<double>{0.5, 0.6}, std::vector<double>{0.1, 0.2}) == 0.0);
    CHECK(threshold_sweep_auc(std::vector<double>{0.3}, std::vector<double>{0.3}) == 0.5);
    CHECK(threshold_sweep_auc(std::vector<double>{0.1, 0.4}, std::vector<double>{0.2, 0.3}) == 0.5);
  }

  TEST_CASE("toy oracle keeps shapes and is deterministic") {
    const ToyDiffusion a(20, 7), b(20, 7), c(20, 8);
    Rng rng(8);
    const auto x = uniform_noise(rng);
    const auto z = a.invert(x);
    CHECK(z.same_shape(x));
    CHECK(a.reconstruct(z).same_shape(x));
    CHECK(z == b.invert(x));
    CHECK(a.reconstruct(z) == b.reconstruct(z));
    CHECK(compute_dire(x, a.oracle()).values == compute_dire(x, toy_oracle(20, 7)).values);
    CHECK_FALSE(compute_dire(x, a.oracle()).values == compute_dire(x, c.oracle()).values);
    Rng r1(9), r2(9);
    CHECK(a.sample(r1) == b.sample(r2));
  }

  TEST_CASE("toy samples reconstruct better than perturbed copies") {
    const ToyDiffusion toy(20, 7);
    const auto oracle = toy.oracle();
    Rng rng(10);
    double in_sum = 0.0, out_sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = toy.sample(rng);
      ImageArray perturbed = x;
      for (auto& v : perturbed.values) v += 0.2 * rng.normal();
      in_sum += dire_score(compute_dire(x, oracle));
      out_sum += dire_score(compute_dire(perturbed, oracle));
    }
    CHECK(in_sum / 100 < out_sum / 100);
  }

  TEST_CASE("toy samples score below the noise decile") {
    const ToyDiffusion toy(20, 7);
    const auto oracle = toy.oracle();
    Rng rng(11);
    std::vector<double> noise;
    for (int i = 0; i < 500; ++i) noise.push_back(dire_score(compute_dire(uniform_noise(rng), oracle)));
    std::sort(noise.begin(), noise.end());
    const double decile = noise[49];
    double mean = 0.0;
    for (int i = 0; i < 50; ++i) mean += dire_score(compute_dire(toy.sample(rng), oracle));
    mean /= 50;
    CHECK(mean < decile);
  }

  TEST_CASE("dire maps are nonnegative and finite") {
    const auto oracle = toy_oracle(10, 3);
    Rng rng(12);
    for (int i = 0; i < 20; ++i)
      for (double v : compute_dire(uniform_noise(rng), oracle).values) {
        CHECK(v >= 0.0);
        CHECK(std::isfinite(v));
      }
  }

  TEST_CASE("oracle description files") {
    testing::TempDir dir("oracle");
    save_oracle_file(dir / "toy.json", "toy", 12, 5, 32);
    const auto o = load_oracle_file(dir / "toy.json");
    Rng rng(13);
    const auto x = uniform_noise(rng);
    CHECK(compute_dire(x, o).values == compute_dire(x, toy_oracle(12, 5, 32)).values);
    save_oracle_file(dir / "id.json", "identity", 0, 0, 32);
    CHECK(dire_score(compute_dire(x, load_oracle_file(dir / "id.json"))) == 0.0);

    write_text_file(dir / "bad.json", "{\"kind\": \"gan\"}");
    auto expect_oracle_error = [](const std::filesystem::path& p) {
      try {
        load_oracle_file(p);
        FAIL("expected an oracle error");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Oracle);
      }
    };
    expect_oracle_error(dir / "bad.json");
    expect_oracle_error(dir / "missing.json");
    write_text_file(dir / "junk.json", "{not json");
    expect_oracle_error(dir / "junk.json");
  }

  TEST_CASE("scores file round trip and map images") {
    testing::TempDir dir("scores");
    const std::vector<DireScoreRecord> recs{{"a.png", 0.125, Verdict::Fake}, {"b.png", 0.75, Verdict::Real}};
    const auto text = serialize_dire_scores(recs, 0.5);
    const auto back = parse_dire_scores(text, "s.tsv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].score == 0.125);
    CHECK(back[1].verdict == Verdict::Real);
    CHECK(parse_table(text, "s").directives.at("threshold") == "0.5");

    save_dire_map(dir / "m.png", DireMap{4, 4, std::vector<double>(48, 2.0)});
    const auto img = load_image(dir / "m.png", 4);
    for (double v : img.values) CHECK(v == doctest::Approx(1.0));  // white
  }
}
