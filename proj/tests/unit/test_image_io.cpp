#include <cmath>
#include <fstream>

#include "cada/errors.hpp"
#include "cada/image_io.hpp"
#include "cada/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using cada::Tensor;

TEST_CASE("pgm round trip stays within quantization error") {
  testutil::TempDir tmp("pgm");
  cada::Rng rng(1);
  Tensor img = testutil::rand_tensor({1, 9, 13}, rng, 0.0, 1.0);
  const std::string path = (tmp / "img.pgm").string();
  cada::save_pgm(path, img);
  Tensor back = cada::load_image(path);
  REQUIRE(back.shape() == img.shape());
  CHECK(testutil::max_abs_diff(img, back) <= 1.0 / 510.0 + 1e-12);
}

TEST_CASE("pgm byte mapping endpoints") {
  testutil::TempDir tmp("pgm_map");
  Tensor img = Tensor::from_values({1, 1, 3}, {0.0, 0.5, 1.0});
  const std::string path = (tmp / "e.pgm").string();
  cada::save_pgm(path, img);

  std::string bytes = testutil::read_file(path);
  // header "P5\n3 1\n255\n" then 3 payload bytes
  REQUIRE(bytes.size() >= 3);
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data() + bytes.size() - 3);
  CHECK(payload[0] == 0);
  CHECK(payload[1] == 128);  // round(127.5) away from zero
  CHECK(payload[2] == 255);

  Tensor back = cada::load_image(path);
  CHECK(back[0] == 0.0);
  CHECK(back[2] == 1.0);
}

TEST_CASE("pgm saving clamps out-of-range values") {
  testutil::TempDir tmp("pgm_clamp");
  Tensor img = Tensor::from_values({1, 1, 2}, {-0.25, 1.25});
  const std::string path = (tmp / "c.pgm").string();
  cada::save_pgm(path, img);
  Tensor back = cada::load_image(path);
  CHECK(back[0] == 0.0);
  CHECK(back[1] == 1.0);
}

TEST_CASE("ppm round trip and green extraction") {
  testutil::TempDir tmp("ppm");
  cada::Rng rng(2);
  Tensor rgb = testutil::rand_tensor({3, 4, 5}, rng, 0.0, 1.0);
  const std::string path = (tmp / "img.ppm").string();
  cada::save_ppm(path, rgb);

  Tensor back = cada::load_image_rgb(path);
  REQUIRE(back.shape() == rgb.shape());
  CHECK(testutil::max_abs_diff(rgb, back) <= 1.0 / 510.0 + 1e-12);

  Tensor green = cada::load_image(path, true);
  REQUIRE(green.shape() == std::vector<int>{1, 4, 5});
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 5; ++w) CHECK(green.at(0, h, w) == back.at(1, h, w));
}

TEST_CASE("p6 pixel (10,200,30) loads as 200/255 through the green channel") {
  testutil::TempDir tmp("p6_green");
  const std::string path = (tmp / "px.ppm").string();
  std::ofstream out(path, std::ios::binary);
  out << "P6\n1 1\n255\n";
  const unsigned char px[3] = {10, 200, 30};
  out.write(reinterpret_cast<const char*>(px), 3);
  out.close();

  Tensor g = cada::load_image(path, true);
  REQUIRE(g.numel() == 1);
  CHECK(g[0] == doctest::Approx(200.0 / 255.0).epsilon(1e-15));

  Tensor avg = cada::load_image(path, false);
  CHECK(avg[0] == doctest::Approx((10.0 + 200.0 + 30.0) / 3.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("pgm header tolerates comments and flexible whitespace") {
  testutil::TempDir tmp("pgm_comments");
  const std::string path = (tmp / "c.pgm").string();
  std::ofstream out(path, std::ios::binary);
  out << "P5\n# a comment line\n 2 # trailing\n1\n255\n";
  const unsigned char px[2] = {0, 255};
  out.write(reinterpret_cast<const char*>(px), 2);
  out.close();

  Tensor img = cada::load_image(path);
  REQUIRE(img.shape() == std::vector<int>{1, 1, 2});
  CHECK(img[0] == 0.0);
  CHECK(img[1] == 1.0);
}

TEST_CASE("image loading rejects malformed files") {
  testutil::TempDir tmp("bad_img");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(cada::load_image((tmp / "nope.pgm").string()), cada::DataError);
  }
  SUBCASE("bad magic") {
    const std::string path = (tmp / "bad.pgm").string();
    testutil::write_file(path, "P7\n1 1\n255\nx");
    CHECK_THROWS_AS(cada::load_image(path), cada::DataError);
  }
  SUBCASE("unsupported maxval") {
    const std::string path = (tmp / "max.pgm").string();
    testutil::write_file(path, "P5\n1 1\n65535\nxx");
    CHECK_THROWS_AS(cada::load_image(path), cada::DataError);
  }
  SUBCASE("truncated payload reports the byte shortfall") {
    const std::string path = (tmp / "short.pgm").string();
    testutil::write_file(path, "P5\n4 4\n255\nabc");
    try {
      cada::load_image(path);
      FAIL("expected throw");
    } catch (const cada::DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("16") != std::string::npos);  // needed bytes
    }
  }
  SUBCASE("zero dimensions") {
    const std::string path = (tmp / "zero.pgm").string();
    testutil::write_file(path, "P5\n0 4\n255\n");
    CHECK_THROWS_AS(cada::load_image(path), cada::DataError);
  }
}

TEST_CASE("save rejects wrong shapes") {
  testutil::TempDir tmp("shape");
  CHECK_THROWS_AS(cada::save_pgm((tmp / "x.pgm").string(), Tensor::zeros({3, 4, 5})),
                  std::invalid_argument);
  CHECK_THROWS_AS(cada::save_ppm((tmp / "x.ppm").string(), Tensor::zeros({1, 4, 5})),
                  std::invalid_argument);
}

TEST_CASE("save_pgm accepts bare [H,W] images") {
  testutil::TempDir tmp("hw");
  Tensor img = Tensor::from_values({2, 2}, {0.0, 1.0, 0.5, 0.25});
  const std::string path = (tmp / "hw.pgm").string();
  cada::save_pgm(path, img);
  Tensor back = cada::load_image(path);
  REQUIRE(back.shape() == std::vector<int>{1, 2, 2});
  CHECK(std::abs(back[1] - 1.0) == 0.0);
}
