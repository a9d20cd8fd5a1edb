#include <gtest/gtest.h>

#include <cmath>

#include "robust_mimo/bench.hpp"
#include "robust_mimo/design.hpp"
#include "robust_mimo/oracle.hpp"

using namespace robust_mimo;
using namespace robust_mimo::oracle;

namespace {

RealVector vec_of(std::initializer_list<double> v) {
  RealVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ComplexMatrix scalar(double v) { return ComplexMatrix::Constant(1, 1, Complex(v, 0.0)); }

}  // namespace

TEST(SampledWorstCase, ZeroRadiusIsNominal) {
  const DesignProblem p{scalar(2.0), 0.0, 1.0, 1.0, 1};
  EXPECT_NEAR(sampled_worst_case(scalar(1.0), scalar(0.5), p, 10, 1), 0.25, 1e-15);
}

TEST(SampledWorstCase, LowerBoundsCertificateAndIsSeeded) {
  const ComplexMatrix H = bench::generate_channel(3, 2, 4);
  const ComplexMatrix F = bench::generate_channel(2, 2, 5);
  const ComplexMatrix G = bench::generate_channel(2, 3, 6);
  const DesignProblem p{H, 0.4, 1.0, 1.0, 2};
  const double a = sampled_worst_case(F, G, p, 2000, 17);
  EXPECT_EQ(a, sampled_worst_case(F, G, p, 2000, 17));
  EXPECT_LE(a, worst_case_error_general(F, G, p).mse_value + 1e-9);
  EXPECT_THROW(sampled_worst_case(F, G, p, 0, 17), PreconditionError);
}

TEST(SampledWorstCase, ConvergesOnScalarInstance) {
  const DesignProblem p{scalar(2.0), 0.5, 1.0, 1.0, 1};
  const double exact = worst_case_error_general(scalar(1.0), scalar(6.0 / 13.0), p).mse_value;
  const double sampled = sampled_worst_case(scalar(1.0), scalar(6.0 / 13.0), p, 1000000, 3);
  EXPECT_LE(sampled, exact + 1e-9);
  EXPECT_LT(exact - sampled, 1e-3);
}

TEST(GridWorstCase, SingleStream) {
  const GridResult r = grid_worst_case_diagonal(vec_of({1.0}), vec_of({1.0}), vec_of({2.0}), 0.5, GridSpec::ball(1, 0.5, 1001));
  EXPECT_NEAR(r.x(0), 0.5, 1e-12);
  EXPECT_NEAR(r.value, 2.25 + 1.0, 1e-12);
}

TEST(GridWorstCase, TwoStreams) {
  const RealVector one = vec_of({1.0, 1.0});
  const GridResult r = grid_worst_case_diagonal(one, one, vec_of({3.0, 1.0}), 1.0, GridSpec::ball(2, 1.0, 201));
  EXPECT_NEAR(r.value, 9.0 + 2.0, 1e-9);
}

TEST(GridWorstCase, ZeroRadiusAndRefusals) {
  const RealVector one = vec_of({1.0, 1.0});
  const GridResult r = grid_worst_case_diagonal(one, one, one, 0.0, GridSpec::ball(2, 1.0, 3));
  EXPECT_EQ(r.x.norm(), 0.0);
  const RealVector four = RealVector::Ones(4);
  EXPECT_THROW(grid_worst_case_diagonal(four, four, four, 0.1, GridSpec::ball(4, 0.1, 3)), PreconditionError);
  EXPECT_THROW(grid_worst_case_diagonal(one, one, one, 0.1, GridSpec::ball(2, 0.1, 1)), PreconditionError);
}

TEST(GridSingleStreamDesign, WorkedInstance) {
  const MinimaxGridResult r = grid_single_stream_design(2.0, 0.5, 1.0, 1.0, 1.0, 2001);
  EXPECT_NEAR(r.value, 4.0 / 13.0, 1e-6);
  EXPECT_NEAR(r.g, 6.0 / 13.0, 1e-3);
  EXPECT_NEAR(r.x, -0.5, 1e-12);
}

TEST(NelderMead, MinimizesRosenbrock) {
  auto rosen = [](const RealVector& v) {
    return 100.0 * std::pow(v(1) - v(0) * v(0), 2) + std::pow(1.0 - v(0), 2);
  };
  double value = 0.0;
  const RealVector x = nelder_mead(rosen, vec_of({-1.2, 1.0}), 0.5, 20000, value);
  EXPECT_NEAR(x(0), 1.0, 1e-4);
  EXPECT_NEAR(x(1), 1.0, 1e-4);
  EXPECT_LT(value, 1e-8);
}

TEST(UnstructuredSearch, ZeroRadiusNeverBeatsWaterFilling) {
  const ComplexMatrix H = bench::generate_channel(2, 2, 12);
  const DesignProblem p{H, 0.0, 1.0, 100.0, 2};
  const Transceiver t = unstructured_design_search(p, 3, 1);
  EXPECT_GE(t.worst_case_mse, nonrobust_design(p).transceiver.worst_case_mse - 1e-6);
  EXPECT_LE(t.F.squaredNorm(), p.power * (1.0 + 1e-12));
  EXPECT_EQ(t.method, Method::unstructured_search);
}

TEST(UnstructuredSearch, StructuredOptimumIsStationary) {
  const ComplexMatrix H = bench::generate_channel(2, 2, 13);
  const DesignProblem p{H, std::sqrt(0.05) * H.norm(), 1.0, 100.0, 2};
  const double optimum = robust_design(p).transceiver.worst_case_mse;
  const Transceiver t = unstructured_design_search(p, 0, 1);
  EXPECT_LE(t.worst_case_mse, optimum + 1e-12);
  EXPECT_GE(t.worst_case_mse, optimum - 1e-6);
}

TEST(UnstructuredSearch, OnlyTwoByTwo) {
  const ComplexMatrix H = bench::generate_channel(3, 3, 1);
  EXPECT_THROW(unstructured_design_search(DesignProblem{H, 0.1, 1.0, 1.0, 2}, 1, 1), PreconditionError);
}
