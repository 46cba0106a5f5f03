#include <catch2/catch_amalgamated.hpp>

#include "pocbounds/oracle.hpp"
#include "test_support.hpp"

using namespace pocbounds;
using testsupport::canonical_theta;
using Catch::Matchers::WithinAbs;

TEST_CASE("vertex oracle reproduces the worked reference bounds") {
  ResponseTypeOracle oracle;
  Theta theta = canonical_theta();
  BoundPair pns = oracle.pns_bounds(theta);
  CHECK_THAT(pns.lower, WithinAbs(0.20, 1e-9));
  CHECK_THAT(pns.upper, WithinAbs(0.50, 1e-9));
  BoundPair pn = oracle.pn_bounds(theta);
  CHECK_THAT(pn.lower, WithinAbs(1.0 / 6.0, 1e-9));
  CHECK_THAT(pn.upper, WithinAbs(5.0 / 6.0, 1e-9));
  BoundPair ps = oracle.ps_bounds(theta);
  CHECK_THAT(ps.lower, WithinAbs(0.375, 1e-9));
  CHECK_THAT(ps.upper, WithinAbs(0.625, 1e-9));
}

TEST_CASE("free-box route reproduces the worked reference bounds") {
  Theta theta = canonical_theta();
  closed_form::FreeBox box = closed_form::free_box(theta);
  CHECK_THAT(box.a, WithinAbs(0.25, 1e-12));
  CHECK_THAT(box.b, WithinAbs(0.25, 1e-12));
  CHECK_THAT(box.u_lo, WithinAbs(0.05, 1e-12));
  CHECK_THAT(box.u_hi, WithinAbs(0.25, 1e-12));
  CHECK_THAT(box.w_lo, WithinAbs(0.00, 1e-12));
  CHECK_THAT(box.w_hi, WithinAbs(0.10, 1e-12));
  BoundPair pns = closed_form::pns_bounds(theta);
  CHECK_THAT(pns.lower, WithinAbs(0.20, 1e-12));
  CHECK_THAT(pns.upper, WithinAbs(0.50, 1e-12));
}

TEST_CASE("three routes agree on random consistent points") {
  // The envelope forms, the vertex-enumeration oracle, and the free-box
  // reduction are independent derivations; they must produce the same
  // bounds everywhere on the consistent region.
  SequentialRng rng(7321);
  ResponseTypeOracle oracle;
  AffineBoundForm pns_form = build_pns_form();
  AffineBoundForm pn_form = build_pn_form();
  AffineBoundForm ps_form = build_ps_form();
  for (int i = 0; i < 1000; ++i) {
    Theta theta = testsupport::random_consistent_theta(rng);
    BoundPair f = pns_form.evaluate(theta);
    BoundPair o = oracle.pns_bounds(theta);
    BoundPair c = closed_form::pns_bounds(theta);
    CHECK_THAT(f.lower, WithinAbs(o.lower, 1e-6));
    CHECK_THAT(f.upper, WithinAbs(o.upper, 1e-6));
    CHECK_THAT(f.lower, WithinAbs(c.lower, 1e-12));
    CHECK_THAT(f.upper, WithinAbs(c.upper, 1e-12));
    if (theta[2] > 1e-3) {
      BoundPair fp = pn_form.evaluate(theta);
      BoundPair op = oracle.pn_bounds(theta);
      BoundPair cp = closed_form::pn_bounds(theta);
      CHECK_THAT(fp.lower, WithinAbs(op.lower, 1e-6));
      CHECK_THAT(fp.upper, WithinAbs(op.upper, 1e-6));
      CHECK_THAT(fp.lower, WithinAbs(cp.lower, 1e-12));
      CHECK_THAT(fp.upper, WithinAbs(cp.upper, 1e-12));
    }
    if (theta[5] > 1e-3) {
      BoundPair fs = ps_form.evaluate(theta);
      BoundPair os = oracle.ps_bounds(theta);
      BoundPair cs = closed_form::ps_bounds(theta);
      CHECK_THAT(fs.lower, WithinAbs(os.lower, 1e-6));
      CHECK_THAT(fs.upper, WithinAbs(os.upper, 1e-6));
      CHECK_THAT(fs.lower, WithinAbs(cs.lower, 1e-12));
      CHECK_THAT(fs.upper, WithinAbs(cs.upper, 1e-12));
    }
  }
}

TEST_CASE("oracle rejects infeasible inputs") {
  ResponseTypeOracle oracle;
  Theta bad = Theta::standard(0.10, 0.35, 0.30, 0.20, 0.10, 0.40);
  CHECK_THROWS_AS(oracle.pns_bounds(bad), InfeasibleThetaError);
}

TEST_CASE("degenerate deterministic point is handled by all routes") {
  Theta det = Theta::standard(1.0, 0.0, 0.5, 0.0, 0.0, 0.5);
  ResponseTypeOracle oracle;
  BoundPair o = oracle.pns_bounds(det);
  CHECK_THAT(o.lower, WithinAbs(1.0, 1e-9));
  CHECK_THAT(o.upper, WithinAbs(1.0, 1e-9));
  BoundPair c = closed_form::pns_bounds(det);
  CHECK_THAT(c.lower, WithinAbs(1.0, 1e-12));
  CHECK_THAT(c.upper, WithinAbs(1.0, 1e-12));
}

TEST_CASE("oracle optimizes arbitrary response-type objectives") {
  // Maximal/minimal mass on the treated always-responder cell
  // q_{a,x}: the free-box coordinate u, so its range is [u_lo, u_hi].
  ResponseTypeOracle oracle;
  Theta theta = canonical_theta();
  Vector obj = Vector::Zero(8);
  obj[0] = 1.0;
  BoundPair range = oracle.optimize(obj, theta);
  closed_form::FreeBox box = closed_form::free_box(theta);
  CHECK_THAT(range.lower, WithinAbs(box.u_lo, 1e-9));
  CHECK_THAT(range.upper, WithinAbs(box.u_hi, 1e-9));
}

TEST_CASE("bounds dispatch by quantity name") {
  ResponseTypeOracle oracle;
  Theta theta = canonical_theta();
  BoundPair pns = oracle.bounds("pns", theta);
  CHECK_THAT(pns.lower, WithinAbs(0.20, 1e-9));
  CHECK_THROWS_AS(oracle.bounds("nope", theta), ValidationError);
}
