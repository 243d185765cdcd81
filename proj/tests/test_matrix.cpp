#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "support/oracles.hpp"
#include "tcclime/matrix.hpp"

using namespace tcclime;
using Catch::Approx;

TEST_CASE("cholesky of small matrices", "[matrix]") {
  SECTION("identity") {
    const auto l = cholesky(SymMatrix::identity(3));
    REQUIRE(l.l == Matrix::Identity(3, 3));
  }
  SECTION("hand-checkable 2x2") {
    Matrix a(2, 2);
    a << 4, 2, 2, 3;
    const auto l = cholesky(SymMatrix(a));
    CHECK(l.l(0, 0) == Approx(2.0));
    CHECK(l.l(1, 0) == Approx(1.0));
    CHECK(l.l(0, 1) == 0.0);
    CHECK(l.l(1, 1) == Approx(std::sqrt(2.0)));
  }
  SECTION("random PD 10x10 reconstructs") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      const SymMatrix a(testing::random_pd(10, rng));
      const auto l = cholesky(a);
      CHECK(max_norm(l.l * l.l.transpose() - a.matrix()) <= 1e-10 * max_norm(a.matrix()));
      CHECK(max_norm(Matrix(l.l.triangularView<Eigen::StrictlyUpper>())) == 0.0);
    }
  }
  SECTION("indefinite input raises NotPositiveDefinite") {
    Matrix a(2, 2);
    a << 1, 2, 2, 1;
    try {
      (void)cholesky(SymMatrix(a));
      FAIL("expected NotPositiveDefinite");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::not_positive_definite);
    }
  }
}

TEST_CASE("SymMatrix construction enforces symmetry", "[matrix]") {
  Matrix a(2, 2);
  a << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(SymMatrix(a), Error);
  const auto s = SymMatrix::symmetrize(a);
  CHECK(s(0, 1) == s(1, 0));
  CHECK(s(0, 1) == Approx(0.45));
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(SymMatrix(bad), Error);
}

TEST_CASE("eigen_sym", "[matrix]") {
  SECTION("diagonal input") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 1;
    a(1, 1) = 3;
    const auto e = eigen_sym(SymMatrix(a));
    CHECK(e.values[0] == Approx(3));
    CHECK(e.values[1] == Approx(1));
    CHECK(std::abs(e.vectors(1, 0)) == Approx(1.0));
    CHECK(std::abs(e.vectors(0, 1)) == Approx(1.0));
  }
  SECTION("swap matrix") {
    Matrix a(2, 2);
    a << 0, 1, 1, 0;
    const auto e = eigen_sym(SymMatrix(a));
    CHECK(e.values[0] == Approx(1));
    CHECK(e.values[1] == Approx(-1));
  }
  SECTION("random symmetric 8x8 reconstructs, values descending") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
      const auto g = testing::random_gaussian_matrix(8, 8, rng);
      const auto a = SymMatrix::symmetrize(g);
      const auto e = eigen_sym(a);
      const Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
      CHECK(max_norm(rec - a.matrix()) <= 1e-8);
      CHECK(max_norm(e.vectors.transpose() * e.vectors - Matrix::Identity(8, 8)) <= 1e-8);
      for (int i = 1; i < 8; ++i) CHECK(e.values[i - 1] >= e.values[i]);
    }
  }
}

TEST_CASE("pd_project clips eigenvalues", "[matrix]") {
  SECTION("PD input with lambda_min 0.5 is unchanged") {
    Matrix a(2, 2);
    a << 1, 0.5, 0.5, 1;  // eigenvalues 1.5, 0.5
    const SymMatrix s(a);
    CHECK(pd_project(s, 1e-3) == s);
  }
  SECTION("diagonal case") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 1;
    a(1, 1) = -0.2;
    const auto out = pd_project(SymMatrix(a), 0.01);
    CHECK(out(0, 0) == Approx(1.0).margin(1e-12));
    CHECK(out(1, 1) == Approx(0.01).margin(1e-12));
    CHECK(std::abs(out(0, 1)) <= 1e-12);
  }
  SECTION("random indefinite: floor holds and projection is idempotent") {
    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
      const auto a = SymMatrix::symmetrize(testing::random_gaussian_matrix(9, 9, rng));
      const auto once = pd_project(a, 1e-3);
      CHECK(min_eigenvalue(once) >= 1e-3 - 1e-10);
      const auto twice = pd_project(once, 1e-3);
      CHECK(max_norm(twice.matrix() - once.matrix()) <= 1e-10);
    }
  }
  CHECK_THROWS_AS(pd_project(SymMatrix::identity(2), 0.0), Error);
}

TEST_CASE("rescale_to_correlation", "[matrix]") {
  SECTION("diagonal") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 4;
    a(1, 1) = 9;
    CHECK(rescale_to_correlation(SymMatrix(a)).matrix() == Matrix::Identity(2, 2));
  }
  SECTION("rank one") {
    Matrix a(2, 2);
    a << 4, 2, 2, 1;
    const auto c = rescale_to_correlation(SymMatrix(a));
    CHECK(c(0, 1) == 1.0);
    CHECK(c(0, 0) == 1.0);
  }
  SECTION("inverse of a banded precision") {
    Matrix omega = Matrix::Zero(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        if (std::abs(i - j) <= 2) omega(i, j) = 2.0 * std::pow(0.4, std::abs(i - j));
    const auto c = rescale_to_correlation(invert_pd(SymMatrix(omega)));
    for (int i = 0; i < 10; ++i) CHECK(c(i, i) == 1.0);
    CHECK(c.matrix().cwiseAbs().maxCoeff() <= 1.0);
  }
  SECTION("idempotent") {
    Rng rng(3);
    const SymMatrix a(testing::random_pd(6, rng));
    const auto c1 = rescale_to_correlation(a);
    const auto c2 = rescale_to_correlation(c1.sym());
    CHECK(c1 == c2);
  }
  SECTION("non-positive diagonal") {
    Matrix a = Matrix::Identity(2, 2);
    a(1, 1) = 0;
    try {
      (void)rescale_to_correlation(SymMatrix(a));
      FAIL("expected NonPositiveDiagonal");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::non_positive_diagonal);
    }
  }
}

TEST_CASE("invert_pd", "[matrix]") {
  CHECK(max_norm(invert_pd(SymMatrix::identity(4)).matrix() - Matrix::Identity(4, 4)) == 0.0);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  const auto inv = invert_pd(SymMatrix(d));
  CHECK(inv(0, 0) == Approx(0.5));
  CHECK(inv(1, 1) == Approx(0.25));

  Matrix omega = Matrix::Zero(20, 20);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      if (std::abs(i - j) <= 7) omega(i, j) = 2.0 * std::pow(0.6, std::abs(i - j));
  const auto sigma = invert_pd(SymMatrix(omega));
  CHECK(max_norm(omega * sigma.matrix() - Matrix::Identity(20, 20)) <= 1e-8);
  CHECK_THROWS_AS(invert_pd(SymMatrix(Matrix(-Matrix::Identity(2, 2)))), Error);
}

TEST_CASE("matrix CSV round-trips at 17 significant digits", "[matrix][io]") {
  Rng rng(8);
  const Matrix m = testing::random_gaussian_matrix(5, 5, rng) * 1e-3;
  std::stringstream ss;
  write_matrix_csv(ss, m);
  const Matrix back = read_matrix_csv(ss);
  CHECK(back == m);

  std::stringstream bad("1,2\n3,x\n");
  try {
    (void)read_matrix_csv(bad);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse_error);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}
