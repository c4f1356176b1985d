#include <catch2/catch_amalgamated.hpp>

#include "echorec/prox.hpp"
#include "echorec/rng.hpp"
#include "oracles.hpp"

using namespace echorec;

namespace {

MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = rng.gaussian();
  return m;
}

} // namespace

TEST_CASE("row_soft_threshold shrinks rows by tau in Euclidean length", "[prox]") {
  MatrixXd z(1, 2);
  z << 3.0, 4.0; // norm 5, tau 2.5 -> factor 0.5
  const MatrixXd out = row_soft_threshold(z, 2.5);
  CHECK(out(0, 0) == Catch::Approx(1.5).margin(1e-12));
  CHECK(out(0, 1) == Catch::Approx(2.0).margin(1e-12));

  SECTION("tau = 0 is the identity") {
    const MatrixXd m = random_matrix(5, 4, 1);
    CHECK((row_soft_threshold(m, 0.0) - m).norm() == 0.0);
  }
  SECTION("rows with norm below tau vanish") {
    const MatrixXd m = random_matrix(6, 3, 2);
    double tau = 0.0;
    for (int r = 0; r < 6; ++r) tau = std::max(tau, m.row(r).norm());
    CHECK(row_soft_threshold(m, tau + 1e-9).norm() == 0.0);
  }
  SECTION("negative tau rejected") {
    CHECK_THROWS_AS(row_soft_threshold(z, -1.0), validation_error);
  }
}

TEST_CASE("row_soft_threshold matches the golden-section prox oracle", "[prox]") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const MatrixXd v = random_matrix(5, 4, 100 + seed);
    const double tau = 0.2 + 0.3 * static_cast<double>(seed);
    const MatrixXd ours = row_soft_threshold(v, tau);
    const MatrixXd ref = oracles::l21_prox_golden(v, tau);
    const double f_ours = oracles::l21_prox_objective(ours, v, tau);
    const double f_ref = oracles::l21_prox_objective(ref, v, tau);
    CHECK(std::abs(f_ours - f_ref) < 1e-8);
  }
}

TEST_CASE("svt shrinks singular values", "[prox]") {
  MatrixXd z = MatrixXd::Zero(2, 2);
  z(0, 0) = 3.0;
  z(1, 1) = 1.0;
  const MatrixXd out = svt(z, 2.0);
  CHECK(out(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(std::abs(out(1, 1)) < 1e-12);
  CHECK(out.norm() == Catch::Approx(1.0).margin(1e-12));

  SECTION("tau = 0 is the identity") {
    const MatrixXd m = random_matrix(4, 3, 3);
    CHECK((svt(m, 0.0) - m).norm() < 1e-12);
  }
  SECTION("tau above the largest singular value yields zero") {
    const MatrixXd m = random_matrix(4, 3, 4);
    const double smax = Eigen::JacobiSVD<MatrixXd>(m).singularValues()(0);
    CHECK(svt(m, smax + 1e-9).norm() < 1e-12);
  }
}

TEST_CASE("svt matches the subgradient-descent prox oracle", "[prox]") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const MatrixXd v = random_matrix(5, 4, 200 + seed);
    const double tau = 0.3 + 0.4 * static_cast<double>(seed);
    const MatrixXd ours = svt(v, tau);
    const MatrixXd ref = oracles::nuclear_prox_subgradient(v, tau);
    const double f_ours = oracles::nuclear_prox_objective(ours, v, tau);
    const double f_ref = oracles::nuclear_prox_objective(ref, v, tau);
    // the exact prox can only be at least as good as the numerical minimizer
    CHECK(f_ours <= f_ref + 1e-6);
    CHECK(std::abs(f_ours - f_ref) < 1e-4);
  }
}

TEST_CASE("both prox operators beat random perturbations of their output", "[prox]") {
  const MatrixXd v = random_matrix(5, 4, 17);
  const double tau = 0.8;
  Rng rng(18);
  auto perturb = [&](const MatrixXd& z) {
    MatrixXd p = z;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      for (Eigen::Index i = 0; i < p.rows(); ++i) p(i, j) += 5e-3 * rng.gaussian();
    return p;
  };
  const MatrixXd z21 = row_soft_threshold(v, tau);
  const MatrixXd znuc = svt(v, tau);
  const double f21 = oracles::l21_prox_objective(z21, v, tau);
  const double fnuc = oracles::nuclear_prox_objective(znuc, v, tau);
  for (int k = 0; k < 1000; ++k) {
    CHECK(oracles::l21_prox_objective(perturb(z21), v, tau) >= f21);
    CHECK(oracles::nuclear_prox_objective(perturb(znuc), v, tau) >= fnuc);
  }
}

TEST_CASE("prox operators are non-expansive", "[prox]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MatrixXd a = random_matrix(5, 4, 300 + seed);
    const MatrixXd b = random_matrix(5, 4, 400 + seed);
    const double tau = 0.1 + 0.2 * static_cast<double>(seed % 7);
    const double dist = (a - b).norm();
    CHECK((row_soft_threshold(a, tau) - row_soft_threshold(b, tau)).norm() <= dist + 1e-12);
    CHECK((svt(a, tau) - svt(b, tau)).norm() <= dist + 1e-12);
  }
}

TEST_CASE("relu_project zeroes negatives and is idempotent", "[prox]") {
  MatrixXd z(2, 2);
  z << -1.0, 2.0, 0.0, -3.0;
  MatrixXd expect(2, 2);
  expect << 0.0, 2.0, 0.0, 0.0;
  CHECK((relu_project(z) - expect).norm() == 0.0);

  const MatrixXd m = random_matrix(6, 5, 5);
  CHECK((relu_project(relu_project(m)) - relu_project(m)).norm() == 0.0);
  const MatrixXd nonneg = m.cwiseAbs();
  CHECK((relu_project(nonneg) - nonneg).norm() == 0.0);
}

TEST_CASE("ridge_lstsq solves the damped normal equations", "[prox]") {
  SECTION("identity system") {
    const MatrixXd b = random_matrix(4, 3, 6);
    const MatrixXd x = ridge_lstsq(MatrixXd::Identity(4, 4), b, 0.5);
    CHECK((x - b / 1.5).norm() < 1e-12);
  }
  SECTION("consistent overdetermined system is recovered exactly") {
    const MatrixXd a = random_matrix(20, 8, 7);
    const MatrixXd x0 = random_matrix(8, 5, 8);
    const MatrixXd x = ridge_lstsq(a, a * x0, 0.0);
    CHECK((x - x0).norm() < 1e-8);
  }
  SECTION("stationarity: A^T(B - A X) == damp X") {
    const MatrixXd a = random_matrix(20, 8, 9);
    const MatrixXd b = random_matrix(20, 5, 10);
    const double damp = 0.3;
    const MatrixXd x = ridge_lstsq(a, b, damp);
    const MatrixXd resid = a.transpose() * (b - a * x) - damp * x;
    CHECK(resid.norm() / (a.transpose() * b).norm() < 1e-8);
  }
  SECTION("singular normal matrix reported when undamped") {
    MatrixXd a = random_matrix(6, 4, 11);
    a.col(3) = a.col(0); // rank deficient
    const MatrixXd b = random_matrix(6, 2, 12);
    CHECK_THROWS_AS(ridge_lstsq(a, b, 0.0), solver_error);
    CHECK_NOTHROW(ridge_lstsq(a, b, 1e-6));
  }
}

TEST_CASE("power_lambda_max agrees with a direct eigensolver", "[prox]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MatrixXd a = random_matrix(10, 6, 500 + seed);
    const MatrixXd ata = a.transpose() * a;
    const double ref = Eigen::SelfAdjointEigenSolver<MatrixXd>(ata).eigenvalues().maxCoeff();
    CHECK(power_lambda_max(ata) == Catch::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("ista_l21 with gamma 0 converges to the least-squares solution", "[prox]") {
  const MatrixXd a = random_matrix(6, 6, 13) + 3.0 * MatrixXd::Identity(6, 6);
  const MatrixXd b = random_matrix(6, 4, 14);
  const MatrixXd z = ista_l21(a, b, 0.0, 1.0, 4000);
  CHECK((a * z - b).norm() / b.norm() < 1e-4);
}

TEST_CASE("ista_l21 with huge gamma returns the zero matrix", "[prox]") {
  const MatrixXd a = random_matrix(6, 6, 15);
  const MatrixXd b = random_matrix(6, 4, 16);
  const double huge = 1e6 * b.norm() * a.norm();
  CHECK(ista_l21(a, b, huge, 1.0, 50).norm() == 0.0);
  CHECK(ista_nuclear(a, b, huge, 1.0, 50).norm() == 0.0);
}

TEST_CASE("ista objectives are monotone non-increasing", "[prox]") {
  const MatrixXd a = random_matrix(8, 6, 17);
  const MatrixXd b = random_matrix(8, 4, 18);
  for (bool nuclear : {false, true}) {
    IstaDiag diag;
    if (nuclear)
      ista_nuclear(a, b, 0.4, 0.7, 100, nullptr, &diag);
    else
      ista_l21(a, b, 0.4, 0.7, 100, nullptr, &diag);
    for (std::size_t i = 1; i < diag.objective_trace.size(); ++i)
      CHECK(diag.objective_trace[i] <= diag.objective_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("ista reaches the long-run proximal-gradient reference", "[prox]") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const MatrixXd a = random_matrix(6, 6, 600 + seed);
    const MatrixXd b = random_matrix(6, 4, 700 + seed);
    const double gamma = 0.1;
    const double weight = 1.0;

    const MatrixXd z21 = ista_l21(a, b, gamma, weight, 30000);
    const MatrixXd ref21 = oracles::reference_prox_gradient(a, b, gamma, weight,
                                                            oracles::RegKind::RowSparse, 100000);
    CHECK(std::abs(oracles::ista_objective(a, b, z21, gamma, weight,
                                           oracles::RegKind::RowSparse) -
                   oracles::ista_objective(a, b, ref21, gamma, weight,
                                           oracles::RegKind::RowSparse)) < 1e-3);

    const MatrixXd znuc = ista_nuclear(a, b, gamma, weight, 30000);
    const MatrixXd refnuc = oracles::reference_prox_gradient(a, b, gamma, weight,
                                                             oracles::RegKind::Nuclear, 100000);
    CHECK(std::abs(oracles::ista_objective(a, b, znuc, gamma, weight,
                                           oracles::RegKind::Nuclear) -
                   oracles::ista_objective(a, b, refnuc, gamma, weight,
                                           oracles::RegKind::Nuclear)) < 1e-3);
  }
}

TEST_CASE("ista flags the all-zero operator", "[prox]") {
  const MatrixXd a = MatrixXd::Zero(5, 3);
  const MatrixXd b = random_matrix(5, 2, 19);
  IstaDiag diag;
  const MatrixXd z = ista_l21(a, b, 0.5, 1.0, 10, nullptr, &diag);
  CHECK(diag.degenerate);
  CHECK(z.norm() == 0.0);
}
