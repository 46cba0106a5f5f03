#include <catch2/catch_amalgamated.hpp>

#include "pocbounds/serialize.hpp"
#include "test_support.hpp"

using namespace pocbounds;
using testsupport::canonical_theta;
using Catch::Matchers::WithinAbs;

TEST_CASE("pns bounds at a worked reference point") {
  AffineBoundForm form = build_pns_form();
  Theta theta = canonical_theta();  // (0.55,0.35 | 0.30,0.20,0.10,0.40)
  BoundPair bp = form.evaluate(theta);
  CHECK_THAT(bp.lower, WithinAbs(0.20, 1e-12));
  CHECK_THAT(bp.upper, WithinAbs(0.50, 1e-12));

  auto lower_vals = form.term_values(Endpoint::kLower, theta.values());
  REQUIRE(lower_vals.size() == 4);
  CHECK_THAT(lower_vals[0], WithinAbs(0.00, 1e-12));
  CHECK_THAT(lower_vals[1], WithinAbs(0.20, 1e-12));
  CHECK_THAT(lower_vals[2], WithinAbs(0.05, 1e-12));
  CHECK_THAT(lower_vals[3], WithinAbs(0.15, 1e-12));
  auto upper_vals = form.term_values(Endpoint::kUpper, theta.values());
  REQUIRE(upper_vals.size() == 4);
  CHECK_THAT(upper_vals[0], WithinAbs(0.55, 1e-12));
  CHECK_THAT(upper_vals[1], WithinAbs(0.65, 1e-12));
  CHECK_THAT(upper_vals[2], WithinAbs(0.70, 1e-12));
  CHECK_THAT(upper_vals[3], WithinAbs(0.50, 1e-12));

  ActiveSetReport act = form.active_sets(theta);
  CHECK(act.lower_active == std::vector<std::size_t>{1});
  CHECK(act.upper_active == std::vector<std::size_t>{3});
  CHECK_THAT(act.lower_gap, WithinAbs(0.05, 1e-12));
  CHECK_THAT(act.upper_gap, WithinAbs(0.05, 1e-12));
}

TEST_CASE("pn and ps bounds at the same reference point") {
  Theta theta = canonical_theta();
  BoundPair pn = build_pn_form().evaluate(theta);
  CHECK_THAT(pn.lower, WithinAbs(1.0 / 6.0, 1e-12));
  CHECK_THAT(pn.upper, WithinAbs(5.0 / 6.0, 1e-12));
  BoundPair ps = build_ps_form().evaluate(theta);
  CHECK_THAT(ps.lower, WithinAbs(0.375, 1e-12));
  CHECK_THAT(ps.upper, WithinAbs(0.625, 1e-12));
}

TEST_CASE("deterministic benefit pins pns to one") {
  // P(y_x)=1 and P(y_x')=0 forces every unit to benefit.
  Theta theta = Theta::standard(1.0, 0.0, 0.5, 0.0, 0.0, 0.5);
  BoundPair bp = build_pns_form().evaluate(theta);
  CHECK_THAT(bp.lower, WithinAbs(1.0, 1e-12));
  CHECK_THAT(bp.upper, WithinAbs(1.0, 1e-12));
}

TEST_CASE("smooth endpoint gradients at the reference point") {
  Theta theta = canonical_theta();
  AffineBoundForm pns = build_pns_form();
  Vector gl = pns.endpoint_gradient(Endpoint::kLower, theta);
  Vector expected_l(6);
  expected_l << 1, -1, 0, 0, 0, 0;
  CHECK((gl - expected_l).lpNorm<Eigen::Infinity>() < 1e-12);
  Vector gu = pns.endpoint_gradient(Endpoint::kUpper, theta);
  Vector expected_u(6);
  expected_u << 1, -1, 0, 1, 1, 0;
  CHECK((gu - expected_u).lpNorm<Eigen::Infinity>() < 1e-12);

  // Quotient rule at the PN upper endpoint: numerator 1 - P(y_x') -
  // P(x',y'), denominator P(x,y) = 0.30, value 0.25/0.30.
  AffineBoundForm pn = build_pn_form();
  Vector gpu = pn.endpoint_gradient(Endpoint::kUpper, theta);
  Vector expected_pn(6);
  expected_pn << 0, -1.0 / 0.30, -0.25 / 0.09, 0, 0, -1.0 / 0.30;
  CHECK((gpu - expected_pn).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("gradients match central finite differences on random points") {
  SequentialRng rng(2024);
  AffineBoundForm pns = build_pns_form();
  AffineBoundForm pn = build_pn_form();
  AffineBoundForm ps = build_ps_form();
  int tested = 0;
  while (tested < 300) {
    Theta theta = testsupport::random_consistent_theta(rng);
    for (const auto* form : {&pns, &pn, &ps}) {
      if (form->denominator_index() &&
          theta[*form->denominator_index()] < 1e-3) {
        continue;
      }
      ActiveSetReport act = form->active_sets(theta);
      for (Endpoint e : {Endpoint::kLower, Endpoint::kUpper}) {
        double gap = e == Endpoint::kLower ? act.lower_gap : act.upper_gap;
        if (gap <= 1e-3) continue;
        Vector g = form->endpoint_gradient(e, theta);
        Vector fd = testsupport::finite_difference_gradient(*form, e,
                                                            theta.values());
        REQUIRE((g - fd).lpNorm<Eigen::Infinity>() < 1e-4);
        ++tested;
      }
    }
  }
  CHECK(tested >= 300);
}

TEST_CASE("tied optimizers raise and generalized gradients take over") {
  // Symmetric point: all four lower terms evaluate to zero.
  Theta tie = Theta::standard(0.5, 0.5, 0.25, 0.25, 0.25, 0.25);
  AffineBoundForm form = build_pns_form();
  CHECK_THROWS_AS(form.endpoint_gradient(Endpoint::kLower, tie),
                  NonSmoothEndpointError);
  CHECK_THROWS_WITH(form.endpoint_gradient(Endpoint::kLower, tie),
                    Catch::Matchers::ContainsSubstring("PNS") &&
                        Catch::Matchers::ContainsSubstring("lower"));

  GeneralizedGradientSet set =
      form.generalized_gradients(Endpoint::kLower, tie);
  REQUIRE(set.active == std::vector<std::size_t>{0, 1, 2, 3});
  REQUIRE(set.gradients.size() == 4);
  Vector g1(6), g2(6), g3(6);
  g1 << 1, -1, 0, 0, 0, 0;
  g2 << 0, -1, 1, 0, 1, 0;
  g3 << 1, 0, -1, 0, -1, 0;
  CHECK(set.gradients[0].lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((set.gradients[1] - g1).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((set.gradients[2] - g2).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((set.gradients[3] - g3).lpNorm<Eigen::Infinity>() < 1e-12);

  // Away from ties the generalized set collapses to the unique gradient.
  Theta theta = canonical_theta();
  GeneralizedGradientSet one =
      form.generalized_gradients(Endpoint::kUpper, theta, 0.0);
  REQUIRE(one.active == std::vector<std::size_t>{3});
  Vector gu = form.endpoint_gradient(Endpoint::kUpper, theta);
  CHECK((one.gradients[0] - gu).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("active-set gap is zero exactly when the optimizer is shared") {
  AffineBoundForm form = build_pns_form();
  Theta tie = Theta::standard(0.5, 0.5, 0.25, 0.25, 0.25, 0.25);
  ActiveSetReport act = form.active_sets(tie);
  CHECK(act.lower_active.size() == 4);
  CHECK(act.lower_gap == 0.0);
  // Two-way tie at the upper envelope: P(y_x) = P(x,y) + P(x',y').
  Theta two = Theta::standard(0.6, 0.2, 0.30, 0.25, 0.15, 0.30);
  ActiveSetReport act2 = form.active_sets(two);
  // Upper terms: {0.60, 0.80, 0.60, 0.80} -> indices 0 and 2 tie.
  CHECK(act2.upper_active == std::vector<std::size_t>{0, 2});
  CHECK(act2.upper_gap == 0.0);
  // The lower envelope keeps its unique optimizer and positive gap.
  CHECK(act2.lower_active == std::vector<std::size_t>{1});
  CHECK_THAT(act2.lower_gap, WithinAbs(0.15, 1e-12));
}

TEST_CASE("bounds never cross at consistent points") {
  SequentialRng rng(5150);
  AffineBoundForm pns = build_pns_form();
  for (int i = 0; i < 2000; ++i) {
    Theta theta = testsupport::random_consistent_theta(rng);
    BoundPair bp = pns.evaluate(theta);
    CHECK(bp.lower <= bp.upper + 1e-12);
  }
}

TEST_CASE("denominator guard fires at and below the floor") {
  AffineBoundForm pn = build_pn_form();
  Vector v(6);
  v << 0.5, 0.5, 0.0, 0.5, 0.25, 0.25;
  CHECK_THROWS_AS(pn.evaluate(v), DegenerateDenominatorError);
  try {
    pn.evaluate(v);
  } catch (const DegenerateDenominatorError& e) {
    CHECK(e.component() == "P(x,y)");
  }
  // Just above the floor evaluates.
  v[2] = 2e-9;
  v[3] = 0.5 - 2e-9;
  CHECK_NOTHROW(pn.evaluate(v));
}

TEST_CASE("form construction validates shapes") {
  ThetaLayout layout = ThetaLayout::standard_poc();
  std::vector<AffineTerm> none;
  std::vector<AffineTerm> one{AffineTerm{Vector::Zero(6), 0.0}};
  CHECK_THROWS_AS(AffineBoundForm(layout, none, one), ValidationError);
  std::vector<AffineTerm> wrong{AffineTerm{Vector::Zero(5), 0.0}};
  CHECK_THROWS_AS(AffineBoundForm(layout, wrong, one), ValidationError);
  CHECK_THROWS_AS(AffineBoundForm(layout, one, one, 6), ValidationError);
  CHECK_NOTHROW(AffineBoundForm(layout, one, one, 2));
}

TEST_CASE("builders are reachable by quantity name") {
  CHECK(build_form("pns").name() == "PNS");
  CHECK(build_form("pn").name() == "PN");
  CHECK(build_form("ps").name() == "PS");
  CHECK(build_form("pn").denominator_index().value() == 2);
  CHECK(build_form("ps").denominator_index().value() == 5);
  CHECK_FALSE(build_form("pns").denominator_index().has_value());
  CHECK_THROWS_AS(build_form("pnx"), ValidationError);
}

TEST_CASE("json round-trip preserves a bound form") {
  AffineBoundForm pn = build_pn_form();
  Json doc = form_to_json(pn);
  AffineBoundForm back = form_from_json(doc, "PN");
  REQUIRE(back.lower_terms().size() == pn.lower_terms().size());
  REQUIRE(back.upper_terms().size() == pn.upper_terms().size());
  CHECK(back.denominator_index() == pn.denominator_index());
  SequentialRng rng(99);
  for (int i = 0; i < 200; ++i) {
    Theta theta = testsupport::random_consistent_theta(rng);
    if (theta[2] < 1e-6) continue;
    BoundPair a = pn.evaluate(theta);
    BoundPair b = back.evaluate(theta);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
  }
  // Missing fields are rejected.
  doc.erase("denominator");
  CHECK_THROWS_AS(form_from_json(doc), ValidationError);
}
