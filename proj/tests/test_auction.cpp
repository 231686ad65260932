#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dmsb/auction.hpp"
#include "dmsb/rng.hpp"

using namespace dmsb;
using auction::AuctionOutcome;
using auction::BidVector;
using auction::MarketInstance;

namespace {

BidVector bids3(double b0, double b1, double b2) {
  return {b0, {b1, b2}};
}

bool feasible(const AuctionOutcome& out) {
  int winners = 0;
  for (const int x : out.allocation) winners += x;
  if (winners != 1 || out.allocation[static_cast<std::size_t>(out.winner)] != 1) return false;
  for (std::size_t i = 0; i < out.payments.size(); ++i) {
    if (static_cast<int>(i) != out.winner && out.payments[i] != 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("auction");

TEST_CASE("msb allocation follows the scaled-threshold rule") {
  SUBCASE("a BS clearing the threshold wins") {
    const auto out = auction::msb_allocate(bids3(1, 5, 2), 2.0);
    CHECK(out.winner == 1);  // 5 > 2 * max(1, 2)
  }
  SUBCASE("no BS clears, the UAV wins") {
    const auto out = auction::msb_allocate(bids3(1, 5, 3), 2.0);
    CHECK(out.winner == auction::kUavId);  // 5 <= 2 * 3
  }
  SUBCASE("any positive bid beats a zero field at rho = 1") {
    for (const double x : {1e-6, 0.5, 3.0, 1e9}) {
      const auto out = auction::msb_allocate({0.0, {x}}, 1.0);
      CHECK(out.winner == 1);
    }
  }
  SUBCASE("exact ties lose and fall through to the UAV") {
    const auto out = auction::msb_allocate(bids3(1, 6, 3), 2.0);
    CHECK(out.winner == auction::kUavId);  // 6 == 2 * 3, strict inequality required
  }
  SUBCASE("rho below 1 is rejected") {
    CHECK_THROWS_AS(auction::msb_allocate(bids3(1, 5, 2), 0.99), std::domain_error);
  }
}

TEST_CASE("msb pricing charges the scaled best competing bid") {
  SUBCASE("winning BS pays rho times the best competitor") {
    const auto out = auction::msb_run(bids3(1, 5, 2), 2.0);
    CHECK(out.winner == 1);
    CHECK(out.payments[1] == doctest::Approx(4.0));
    CHECK(out.payments[0] == 0.0);
    CHECK(out.payments[2] == 0.0);
  }
  SUBCASE("winning UAV pays its contracted payment") {
    const auto out = auction::msb_run(bids3(3, 5, 3), 2.0);
    CHECK(out.winner == auction::kUavId);
    CHECK(out.payments[0] == doctest::Approx(3.0));
  }
  SUBCASE("second-highest of zero means a free win") {
    const auto out = auction::msb_run({0.0, {7.0}}, 1.0);
    CHECK(out.winner == 1);
    CHECK(out.payments[1] == doctest::Approx(0.0));
  }
  SUBCASE("a mismatched outcome is rejected") {
    auto out = auction::msb_allocate(bids3(1, 5, 2), 2.0);
    out.winner = 2;
    CHECK_THROWS_AS(auction::msb_price(bids3(1, 5, 2), 2.0, out), std::domain_error);
  }
}

TEST_CASE("critical payment") {
  std::vector<double> two{2.0, 1.0};
  CHECK(auction::critical_payment(two, 2.0) == doctest::Approx(4.0));

  std::vector<double> zeros{0.0, 0.0, 0.0};
  CHECK(auction::critical_payment(zeros, 7.0) == doctest::Approx(0.0));

  std::vector<double> scaled{3.7 * 2.0, 3.7 * 1.0};
  CHECK(auction::critical_payment(scaled, 2.0) == doctest::Approx(14.8));

  CHECK_THROWS_AS(auction::critical_payment({}, 2.0), std::domain_error);
}

TEST_CASE("contracted bid maximizes empirical expected profit") {
  SUBCASE("two-sample hand example") {
    std::vector<double> vmax{2.0, 20.0};
    std::vector<double> v0{10.0, 10.0};
    std::vector<double> grid{2.0, 20.0};
    const auto result = auction::uav_contracted_bid(vmax, v0, grid);
    CHECK(result.bid == doctest::Approx(2.0));
    CHECK(result.grid_index == 0);
    CHECK(result.expected_profit == doctest::Approx(4.0));
  }
  SUBCASE("never profitable melts to the zero grid point") {
    std::vector<double> vmax{5.0, 6.0, 7.0};
    std::vector<double> v0{1.0, 2.0, 3.0};
    const auto grid = auction::make_bid_grid(vmax, 50);
    const auto result = auction::uav_contracted_bid(vmax, v0, grid);
    CHECK(result.bid == doctest::Approx(0.0));
    CHECK(result.grid_index == 0);
  }
  SUBCASE("single profitable sample, tie-break toward the smallest bid") {
    std::vector<double> vmax{5.0};
    std::vector<double> v0{9.0};
    std::vector<double> grid{0.0, 2.5, 5.0, 7.5, 10.0};
    const auto result = auction::uav_contracted_bid(vmax, v0, grid);
    CHECK(result.bid == doctest::Approx(5.0));
    CHECK(result.expected_profit == doctest::Approx(4.0));
  }
  SUBCASE("empty history is a domain error") {
    std::vector<double> grid{0.0, 1.0};
    CHECK_THROWS_AS(auction::uav_contracted_bid({}, {}, grid), std::domain_error);
  }
}

TEST_CASE("surplus is the winner's weighted valuation") {
  std::vector<double> valuations{6.0, 2.0, 9.0};

  auto uav_wins = auction::msb_run(bids3(10, 1, 1), 2.0);
  REQUIRE(uav_wins.winner == auction::kUavId);
  CHECK(auction::surplus(uav_wins, valuations, {1.0}) == doctest::Approx(6.0));
  CHECK(auction::surplus(uav_wins, valuations, {0.5}) == doctest::Approx(3.0));

  auto bs_wins = auction::msb_run(bids3(1, 2, 9), 2.0);
  REQUIRE(bs_wins.winner == 2);
  CHECK(auction::surplus(bs_wins, valuations, {1.0}) == doctest::Approx(9.0));

  auction::realize_surplus(uav_wins, valuations);
  CHECK(uav_wins.uav_surplus == doctest::Approx(6.0));
  CHECK(uav_wins.bs_surplus == doctest::Approx(0.0));
  auction::realize_surplus(bs_wins, valuations);
  CHECK(bs_wins.uav_surplus == doctest::Approx(0.0));
  CHECK(bs_wins.bs_surplus == doctest::Approx(9.0));
}

TEST_CASE("second-price auction") {
  SUBCASE("highest bidder pays the runner-up") {
    const auto out = auction::spa(bids3(3, 5, 4));
    CHECK(out.winner == 1);
    CHECK(out.payments[1] == doctest::Approx(4.0));
  }
  SUBCASE("ties break toward the lowest id") {
    const auto out = auction::spa(bids3(5, 5, 1));
    CHECK(out.winner == 0);
    CHECK(out.payments[0] == doctest::Approx(5.0));
  }
  SUBCASE("single BS against a zero UAV bid") {
    const auto out = auction::spa({0.0, {2.0}});
    CHECK(out.winner == 1);
    CHECK(out.payments[1] == doctest::Approx(0.0));
  }
}

TEST_CASE("myopic scaling factor") {
  CHECK(auction::myopic_rho(bids3(4, 2, 1)) == doctest::Approx(2.0));
  CHECK(auction::myopic_rho({2.0, {2.0}}) == doctest::Approx(1.0));
  CHECK(auction::myopic_rho({1.0, {3.0}}) == doctest::Approx(3.0));
}

TEST_CASE("optimal scaling factor uses historical means") {
  std::vector<BidVector> one{{4.0, {2.0}}};
  CHECK(auction::optimal_rho(one) == doctest::Approx(2.0));

  std::vector<BidVector> flat{{2.0, {2.0}}, {5.0, {5.0}}};
  CHECK(auction::optimal_rho(flat) == doctest::Approx(1.0));

  std::vector<BidVector> two{{4.0, {2.0}}, {6.0, {3.0}}};
  CHECK(auction::optimal_rho(two) == doctest::Approx(2.0));

  CHECK_THROWS_AS(auction::optimal_rho({}), std::domain_error);
}

TEST_CASE("truthfulness holds on random instances") {
  Rng rng(4711);
  std::vector<double> grid(100);
  for (int trial = 0; trial < 1000; ++trial) {
    MarketInstance market;
    const int n = rng.uniform_int(1, 8);
    market.valuations.push_back(rng.uniform(0.0, 50.0));
    for (int i = 0; i < n; ++i) market.valuations.push_back(rng.uniform(0.0, 50.0));
    market.uav_contracted_bid = rng.uniform(0.0, 50.0);
    const double rho = rng.uniform(1.0, 10.0);

    const double hi = 1.05 * rho * 50.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      grid[g] = hi * static_cast<double>(g) / static_cast<double>(grid.size() - 1);
    }
    const auto result = auction::check_truthfulness(market, rho, grid);
    CHECK(result.passed);
  }
}

TEST_CASE("a zero-value bidder passes trivially") {
  MarketInstance market;
  market.valuations = {5.0, 0.0, 3.0};
  market.uav_contracted_bid = 2.0;
  std::vector<double> grid{0.0, 1.0, 2.0, 5.0, 10.0, 40.0};
  const auto result = auction::check_truthfulness(market, 1.5, grid);
  CHECK(result.passed);
}

TEST_CASE("verdict and winner are invariant under common scaling") {
  Rng rng(4712);
  for (int trial = 0; trial < 200; ++trial) {
    MarketInstance market;
    const int n = rng.uniform_int(1, 6);
    market.valuations.push_back(rng.uniform(0.1, 20.0));
    for (int i = 0; i < n; ++i) market.valuations.push_back(rng.uniform(0.1, 20.0));
    market.uav_contracted_bid = rng.uniform(0.0, 20.0);
    const double rho = rng.uniform(1.0, 5.0);
    const double theta = 3.7;

    std::vector<double> grid;
    for (int g = 0; g < 50; ++g) grid.push_back(rho * 25.0 * g / 49.0);

    MarketInstance scaled = market;
    for (auto& v : scaled.valuations) v *= theta;
    scaled.uav_contracted_bid *= theta;
    std::vector<double> scaled_grid = grid;
    for (auto& g : scaled_grid) g *= theta;

    CHECK(auction::check_truthfulness(market, rho, grid).passed ==
          auction::check_truthfulness(scaled, rho, scaled_grid).passed);

    BidVector bids{market.uav_contracted_bid,
                   {market.valuations.begin() + 1, market.valuations.end()}};
    BidVector scaled_bids{scaled.uav_contracted_bid,
                          {scaled.valuations.begin() + 1, scaled.valuations.end()}};
    CHECK(auction::msb_allocate(bids, rho).winner ==
          auction::msb_allocate(scaled_bids, rho).winner);
  }
}

TEST_CASE("feasibility and winner uniqueness over random bid vectors") {
  Rng rng(4713);
  for (int trial = 0; trial < 100000; ++trial) {
    BidVector bids;
    bids.uav_bid = rng.uniform(0.0, 100.0);
    const int n = rng.uniform_int(1, 9);
    for (int i = 0; i < n; ++i) bids.bs_bids.push_back(rng.uniform(0.0, 100.0));
    const double rho = 1.0 + rng.uniform() * 9.0;

    const auto out = auction::msb_run(bids, rho);
    CHECK(feasible(out));

    // With rho >= 1 the strict threshold can admit at most one BS.
    int eligible = 0;
    for (int b = 1; b <= n; ++b) {
      double best_other = bids.uav_bid;
      for (int j = 1; j <= n; ++j) {
        if (j != b) best_other = std::max(best_other, bids.bid_of(j));
      }
      if (bids.bid_of(b) > rho * best_other) ++eligible;
    }
    CHECK(eligible <= 1);
    if (out.winner != auction::kUavId) {
      CHECK(eligible == 1);
      // Winner-payment dominance: a winning BS pays strictly below its bid.
      CHECK(out.payments[static_cast<std::size_t>(out.winner)] < bids.bid_of(out.winner));
    }
  }
}

TEST_CASE("degree-one homogeneity of the critical payment") {
  Rng rng(4714);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = rng.uniform_int(1, 9);
    std::vector<double> others;
    for (int i = 0; i < n; ++i) others.push_back(rng.uniform(0.0, 100.0));
    const double theta = rng.uniform(1e-3, 100.0);
    const double rho = rng.uniform(1.0, 10.0);

    const double psi = auction::critical_payment(others, rho);
    std::vector<double> scaled = others;
    for (auto& b : scaled) b *= theta;
    const double psi_scaled = auction::critical_payment(scaled, rho);
    CHECK(std::abs(psi_scaled - theta * psi) <=
          1e-12 * std::max(std::abs(theta * psi), 1e-300));
  }
}

TEST_CASE("msb with rho 1 and a zero UAV bid degenerates to SPA over the BSs") {
  Rng rng(4715);
  for (int trial = 0; trial < 2000; ++trial) {
    BidVector bids;
    bids.uav_bid = 0.0;
    const int n = rng.uniform_int(2, 9);
    for (int i = 0; i < n; ++i) bids.bs_bids.push_back(rng.uniform(0.01, 100.0));

    const auto msb = auction::msb_run(bids, 1.0);
    // SPA restricted to the BS bidders.
    int spa_winner = 1;
    for (int b = 2; b <= n; ++b) {
      if (bids.bid_of(b) > bids.bid_of(spa_winner)) spa_winner = b;
    }
    CHECK(msb.winner == spa_winner);
  }
}

TEST_SUITE_END();
