#include <doctest.h>

#include <set>

#include "aigi/common.hpp"
#include "aigi/registry.hpp"
#include "aigi/table_file.hpp"
#include "test_support.hpp"

using namespace aigi;

TEST_SUITE("registry") {
  TEST_CASE("builtin has eleven classes with their reference captions") {
    const auto r = Registry::builtin();
    CHECK(r.size() == 11);
    CHECK(r.caption_for(r.class_of("ADM")) == "a fake image from ablated diffusion");
    CHECK(r.caption_for(r.class_of("Real")) == "a real image with no alterations");
    CHECK(r.caption_for(r.class_of("PNDM")) == "a fake image from psuedo numerical diffusion");
    CHECK(r.caption_for(r.class_of("LDM")) == "a fake image from latent diffusion");
  }

  TEST_CASE("caption lookup out of range") {
    const auto r = Registry::builtin();
    CHECK_THROWS_AS(r.caption_for(99), Error);
    try {
      r.caption_for(99);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Lookup);
      CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
    CHECK_THROWS_AS(r.caption_for(-1), Error);
  }

  TEST_CASE("is_fake") {
    const auto r = Registry::builtin();
    CHECK_FALSE(r.is_fake(r.class_of("Real")));
    CHECK(r.is_fake(r.class_of("SG")));
    int fakes = 0;
    for (const auto& c : r.classes()) fakes += r.is_fake(c.class_id);
    CHECK(fakes == 10);
  }

  TEST_CASE("family counts") {
    const auto r = Registry::builtin();
    int diffusion = 0, gan = 0, real = 0;
    for (const auto& c : r.classes()) {
      diffusion += c.family == Family::Diffusion;
      gan += c.family == Family::Gan;
      real += c.family == Family::Real;
    }
    CHECK(diffusion == 5);
    CHECK(gan == 5);
    CHECK(real == 1);
  }

  TEST_CASE("ids contiguous and lookups injective") {
    const auto r = Registry::builtin();
    std::set<std::string> captions, abbreviations;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const auto& c = r.classes()[i];
      CHECK(c.class_id == static_cast<int>(i));
      CHECK(r.find_caption(r.caption_for(c.class_id)) == c.class_id);
      CHECK(r.find_abbreviation(c.abbreviation) == c.class_id);
      captions.insert(c.caption);
      abbreviations.insert(c.abbreviation);
      CHECK(c.caption == normalize_caption(c.caption));
      const bool real = c.caption.find("real") != std::string::npos;
      CHECK(real == (c.family == Family::Real));
      if (c.family != Family::Real) CHECK(c.caption.find("fake") != std::string::npos);
    }
    CHECK(captions.size() == r.size());
    CHECK(abbreviations.size() == r.size());
    CHECK_FALSE(r.find_abbreviation("XYZ").has_value());
    CHECK_THROWS_AS(r.class_of("XYZ"), Error);
  }

  TEST_CASE("caption normalization strips quotes and lowercases") {
    CHECK(normalize_caption("  \"A Fake Image from ProGAN\" ") == "a fake image from progan");
    CHECK(normalize_caption("'a  real\timage'") == "a real image");
  }

  TEST_CASE("prefix toggle") {
    const auto r = Registry::builtin();
    const int adm = r.class_of("ADM");
    CHECK(r.caption_for(adm, false) == "a fake image from ablated diffusion");
    CHECK(r.caption_for(adm, true) == "an image of a fake image from ablated diffusion");
    CHECK(prefixed_caption("real photo") == "an image of a real photo");
  }

  TEST_CASE("validation") {
    using V = std::vector<GeneratorClass>;
    CHECK_THROWS_AS(Registry(V{}), Error);
    CHECK_THROWS_AS(Registry(V{{0, "A", "A", Family::Gan, "a fake image"}}), Error);  // no real class
    CHECK_THROWS_AS(Registry(V{{0, "R", "R", Family::Real, "a real image"}, {0, "S", "S", Family::Real, "another real image"}}),
                    Error);
    CHECK_THROWS_AS(Registry(V{{0, "R", "R", Family::Real, "a photo"}}), Error);
    CHECK_THROWS_AS(Registry(V{{0, "R", "R", Family::Real, "a real image"}, {0, "F", "F", Family::Gan, "a gan image"}}),
                    Error);
    CHECK_THROWS_AS(Registry(V{{0, "R", "R", Family::Real, "a real image"}, {0, "F", "F", Family::Gan, "a fake real image"}}),
                    Error);
    CHECK_THROWS_AS(Registry(V{{0, "R", "R", Family::Real, "a real image"}, {0, "S", "R", Family::Gan, "a fake image"}}),
                    Error);
    CHECK_THROWS_AS(Registry(V{{0, "R", "R", Family::Real, "a real image"}, {0, "F", "F", Family::Gan, "A Real Image"}}),
                    Error);
  }

  TEST_CASE("config file round trip") {
    testing::TempDir dir("registry");
    const auto r = Registry::builtin();
    write_text_file(dir / "registry.tsv", r.serialize());
    const auto back = Registry::load(dir / "registry.tsv");
    REQUIRE(back.size() == r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(back.classes()[i].abbreviation == r.classes()[i].abbreviation);
      CHECK(back.classes()[i].caption == r.classes()[i].caption);
      CHECK(back.classes()[i].family == r.classes()[i].family);
      CHECK(back.classes()[i].name == r.classes()[i].name);
    }
    CHECK(back.fingerprint() == r.fingerprint());
  }

  TEST_CASE("config file adds a class without code changes") {
    const std::string text =
        "abbreviation\tname\tfamily\tcaption\n"
        "SD\tStable Diffusion\tdiffusion\t\"A Fake image from stable diffusion\"\n"
        "Real\tReal Image\treal\ta real image with no alterations\n";
    const auto r = Registry::parse(text, "inline");
    CHECK(r.size() == 2);
    CHECK(r.caption_for(0) == "a fake image from stable diffusion");
    CHECK(r.real_class() == 1);
    CHECK(r.fingerprint() != Registry::builtin().fingerprint());
  }

  TEST_CASE("bad config rows name the line") {
    const std::string text =
        "abbreviation\tname\tfamily\tcaption\n"
        "SD\tStable Diffusion\tvae\ta fake image\n";
    try {
      Registry::parse(text, "reg.tsv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("reg.tsv:2") != std::string::npos);
    }
  }
}

TEST_SUITE("table_file") {
  TEST_CASE("directives, header and rows") {
    const auto t = parse_table("# root: /data\n# method: CLIP\na\tb\n1\t2\n\n3\t4\n", "t");
    CHECK(t.directives.at("root") == "/data");
    CHECK(t.directives.at("method") == "CLIP");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1].fields[1] == "4");
    CHECK(t.rows[1].line == 6);
    CHECK(render_table(t) == "# method: CLIP\n# root: /data\na\tb\n1\t2\n3\t4\n");
  }

  TEST_CASE("field count mismatch") {
    CHECK_THROWS_WITH_AS(parse_table("a\tb\n1\n", "x.tsv"), doctest::Contains("x.tsv:2"), Error);
  }

  TEST_CASE("render rejects embedded tabs") {
    TableFile t;
    t.columns = {"a"};
    t.rows.push_back({0, {"x\ty"}});
    CHECK_THROWS_AS(render_table(t), Error);
  }
}

TEST_SUITE("common") {
  TEST_CASE("rng is reproducible and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
      const double u = a.uniform();
      CHECK(u == b.uniform());
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      const auto k = a.uniform_int(-3, 3);
      CHECK(k == b.uniform_int(-3, 3));
      CHECK(k >= -3);
      CHECK(k <= 3);
    }
  }

  TEST_CASE("normal draws have unit variance") {
    Rng rng(1);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double x = rng.normal();
      sum += x;
      sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.01);
  }

  TEST_CASE("format_exact round trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125}) CHECK(std::stod(format_exact(v)) == v);
  }
}
