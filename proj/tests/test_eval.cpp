#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "mwsl/eval.hpp"
#include "mwsl/simulator.hpp"

using namespace mwsl;
using namespace mwsl::eval;

TEST_CASE("tte_metrics basics") {
  CHECK(tte_metrics({50, 60}, {50, 60}).rmse == 0.0);
  auto m = tte_metrics({110}, {100});
  CHECK(m.rmse == doctest::Approx(10.0));
  CHECK(m.mae == doctest::Approx(10.0));
  CHECK(m.mape == doctest::Approx(0.10));
  CHECK_THROWS_WITH_AS(tte_metrics({1.0, 2.0}, {3.0, 0.0}), doctest::Contains("entry 1"),
                       std::invalid_argument);
  CHECK_THROWS_AS(tte_metrics({}, {}), std::invalid_argument);
}

TEST_CASE("rmse dominates mae on random inputs") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> val(1.0, 300.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    std::vector<double> p(n), t(n);
    for (int i = 0; i < n; ++i) {
      p[i] = val(rng);
      t[i] = val(rng);
    }
    auto m = tte_metrics(p, t);
    CHECK(m.rmse >= m.mae - 1e-12);
    CHECK(m.mae >= 0.0);
  }
}

TEST_CASE("route accuracy: identical, disjoint and the worked quarter") {
  auto net = sim::generate_city(3, 3, 2);
  std::vector<int> a{0, 2, 4};
  CHECK(route_accuracy(net, a, a) == doctest::Approx(1.0));
  CHECK(route_accuracy(net, {0, 2}, {5, 7}) == doctest::Approx(0.0));
  // symmetry on random subsets
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> x, y;
    for (int e = 0; e < net.num_segments(); ++e) {
      if (rng() % 3 == 0) x.push_back(e);
      if (rng() % 3 == 0) y.push_back(e);
    }
    if (x.empty() || y.empty()) continue;
    CHECK(route_accuracy(net, x, y) == doctest::Approx(route_accuracy(net, y, x)));
    CHECK(route_accuracy(net, x, y) >= 0.0);
    CHECK(route_accuracy(net, x, y) <= 1.0);
  }
}

TEST_CASE("condition map follows the speed-limit quartiles") {
  // single street, 60 km/h limit, 1000 m long
  roadnet::RoadNetwork net;
  net.intersections.push_back({0, 34.0, 108.0, roadnet::NodeTag::none, 1});
  net.intersections.push_back({1, 34.01, 108.0, roadnet::NodeTag::none, 1});
  roadnet::RoadSegment s;
  s.id = 0;
  s.from_node = 0;
  s.to_node = 1;
  s.road_type = roadnet::RoadType::primary;
  s.length_m = 1000.0;
  s.lanes = 2;
  s.one_way = true;
  s.speed_kph = 60.0;
  net.segments.push_back(s);
  roadnet::validate_and_build(net);

  model::GaussianField field;
  field.mu_e.resize(1);
  field.sigma_e = Eigen::VectorXd::Ones(1);
  field.mu_v = Eigen::VectorXd::Zero(2);
  field.sigma_v = Eigen::VectorXd::Ones(2);

  auto state_for_speed = [&](double kph) {
    field.mu_e[0] = 3.6 * s.length_m / kph;
    return condition_map(net, field)[0];
  };
  CHECK(state_for_speed(10.0) == RoadState::very_congested);  // below 15
  CHECK(state_for_speed(14.999) == RoadState::very_congested);
  CHECK(state_for_speed(15.0) == RoadState::congested);  // lower-inclusive boundary
  CHECK(state_for_speed(29.0) == RoadState::congested);
  CHECK(state_for_speed(30.0) == RoadState::slow);
  CHECK(state_for_speed(44.0) == RoadState::slow);
  CHECK(state_for_speed(45.0) == RoadState::unblocked);

  // mu at exactly free flow implies the limit itself: unblocked
  field.mu_e[0] = s.free_flow_seconds();
  CHECK(condition_map(net, field)[0] == RoadState::unblocked);

  // invariant under a uniform rescale of mu and length
  field.mu_e[0] = 3.6 * s.length_m / 22.0;
  auto before = condition_map(net, field)[0];
  net.segments[0].length_m *= 3.0;
  field.mu_e[0] *= 3.0;
  CHECK(condition_map(net, field)[0] == before);
}

TEST_CASE("condition agreement counts matching states") {
  std::vector<RoadState> a{RoadState::slow, RoadState::congested, RoadState::unblocked};
  CHECK(condition_agreement(a, a) == doctest::Approx(1.0));
  std::vector<RoadState> shifted{RoadState::congested, RoadState::unblocked,
                                 RoadState::very_congested};
  CHECK(condition_agreement(a, shifted) == doctest::Approx(0.0));
  std::vector<RoadState> half{RoadState::slow, RoadState::unblocked, RoadState::unblocked};
  CHECK(condition_agreement(a, half) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("report serializes to the documented JSON schema") {
  EvalReport r;
  r.rmse = 12.5;
  r.mae = 9.25;
  r.mape = 0.21;
  r.route_accuracy = 0.84;
  r.field_mape_frequent = 0.19;
  r.n_validation = 321;
  r.condition_agreement_per_slot[8] = 0.74;
  const auto parsed = nlohmann::json::parse(report_to_json(r));
  CHECK(parsed.at("rmse").get<double>() == doctest::Approx(12.5));
  CHECK(parsed.at("mae").get<double>() == doctest::Approx(9.25));
  CHECK(parsed.at("mape").get<double>() == doctest::Approx(0.21));
  CHECK(parsed.at("route_accuracy").get<double>() == doctest::Approx(0.84));
  CHECK(parsed.at("field_mape_frequent").get<double>() == doctest::Approx(0.19));
  CHECK(parsed.at("n_validation").get<int>() == 321);
  CHECK(parsed.at("condition_agreement_per_slot").at("8").get<double>() == doctest::Approx(0.74));
}
