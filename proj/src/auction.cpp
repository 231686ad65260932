#include "dmsb/auction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dmsb::auction {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::domain_error(what);
}

// Highest competing bid seen by provider `id` (all bids except its own).
double best_competing_bid(const BidVector& bids, int id) {
  double best = -std::numeric_limits<double>::infinity();
  if (id != kUavId) best = bids.uav_bid;
  for (int n = 0; n < static_cast<int>(bids.bs_bids.size()); ++n) {
    if (n + 1 == id) continue;
    best = std::max(best, bids.bs_bids[static_cast<std::size_t>(n)]);
  }
  return best;
}

AuctionOutcome empty_outcome(int provider_count) {
  AuctionOutcome out;
  out.allocation.assign(static_cast<std::size_t>(provider_count), 0);
  out.payments.assign(static_cast<std::size_t>(provider_count), 0.0);
  return out;
}

}  // namespace

double BidVector::bid_of(int id) const {
  if (id == kUavId) return uav_bid;
  const auto idx = static_cast<std::size_t>(id - 1);
  if (idx >= bs_bids.size()) throw std::domain_error("bid_of: no such provider");
  return bs_bids[idx];
}

void BidVector::validate() const {
  if (bs_bids.empty()) throw std::domain_error("at least one ground BS bid is required");
  if (uav_bid < 0.0) throw std::domain_error("negative UAV bid");
  for (const double b : bs_bids) {
    if (!(b >= 0.0)) throw std::domain_error("negative or non-finite BS bid");
  }
}

void SurplusWeights::validate() const {
  if (!(zeta > 0.0)) throw std::domain_error("zeta must be positive");
}

AuctionOutcome msb_allocate(const BidVector& bids, double rho) {
  bids.validate();
  require(rho >= 1.0, "price scaling factor must be at least 1");

  AuctionOutcome out = empty_outcome(bids.provider_count());
  out.price_scale = rho;
  out.winner = kUavId;
  // With rho >= 1 at most one BS can clear the strict threshold.
  for (int n = 1; n < bids.provider_count(); ++n) {
    if (bids.bid_of(n) > rho * best_competing_bid(bids, n)) {
      out.winner = n;
      break;
    }
  }
  out.allocation[static_cast<std::size_t>(out.winner)] = 1;
  return out;
}

void msb_price(const BidVector& bids, double rho, AuctionOutcome& outcome) {
  bids.validate();
  require(rho >= 1.0, "price scaling factor must be at least 1");
  require(outcome.allocation.size() == static_cast<std::size_t>(bids.provider_count()) &&
              outcome.winner >= 0 && outcome.winner < bids.provider_count() &&
              outcome.allocation[static_cast<std::size_t>(outcome.winner)] == 1,
          "outcome does not match the bid vector");

  std::fill(outcome.payments.begin(), outcome.payments.end(), 0.0);
  if (outcome.winner == kUavId) {
    outcome.payments[kUavId] = bids.uav_bid;
  } else {
    outcome.payments[static_cast<std::size_t>(outcome.winner)] =
        rho * best_competing_bid(bids, outcome.winner);
  }
}

AuctionOutcome msb_run(const BidVector& bids, double rho) {
  AuctionOutcome out = msb_allocate(bids, rho);
  msb_price(bids, rho, out);
  return out;
}

double critical_payment(std::span<const double> other_bids, double rho) {
  require(!other_bids.empty(), "critical payment needs at least one competing bid");
  require(rho >= 1.0, "price scaling factor must be at least 1");
  return rho * *std::max_element(other_bids.begin(), other_bids.end());
}

ContractedBid uav_contracted_bid(std::span<const double> vmax_samples,
                                 std::span<const double> v0_samples,
                                 std::span<const double> grid) {
  require(!vmax_samples.empty(), "empty contracted-bid history");
  require(vmax_samples.size() == v0_samples.size(), "vmax/v0 histories differ in length");
  require(!grid.empty(), "empty bid grid");

  ContractedBid best;
  best.expected_profit = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double profit = 0.0;
    for (std::size_t t = 0; t < vmax_samples.size(); ++t) {
      if (vmax_samples[t] <= grid[g]) profit += v0_samples[t] - vmax_samples[t];
    }
    profit /= static_cast<double>(vmax_samples.size());
    if (profit > best.expected_profit) {
      best = {grid[g], g, profit};
    }
  }
  return best;
}

std::vector<double> make_bid_grid(std::span<const double> vmax_samples, std::size_t points) {
  require(!vmax_samples.empty(), "empty contracted-bid history");
  require(points >= 2, "bid grid needs at least two points");
  const double hi = *std::max_element(vmax_samples.begin(), vmax_samples.end());
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = hi * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

void realize_surplus(AuctionOutcome& outcome, std::span<const double> valuations) {
  require(valuations.size() == outcome.allocation.size(), "valuation count mismatch");
  outcome.uav_surplus = outcome.winner == kUavId ? valuations[kUavId] : 0.0;
  outcome.bs_surplus =
      outcome.winner == kUavId ? 0.0 : valuations[static_cast<std::size_t>(outcome.winner)];
}

double surplus(const AuctionOutcome& outcome, std::span<const double> valuations,
               const SurplusWeights& weights) {
  weights.validate();
  require(valuations.size() == outcome.allocation.size(), "valuation count mismatch");
  int winners = 0;
  for (const int x : outcome.allocation) winners += x;
  require(winners == 1, "outcome must have exactly one winner");
  const double v = valuations[static_cast<std::size_t>(outcome.winner)];
  return outcome.winner == kUavId ? weights.zeta * v : v;
}

AuctionOutcome spa(const BidVector& bids) {
  bids.validate();
  AuctionOutcome out = empty_outcome(bids.provider_count());
  int winner = kUavId;
  for (int n = 1; n < bids.provider_count(); ++n) {
    if (bids.bid_of(n) > bids.bid_of(winner)) winner = n;
  }
  out.winner = winner;
  out.allocation[static_cast<std::size_t>(winner)] = 1;
  out.payments[static_cast<std::size_t>(winner)] = best_competing_bid(bids, winner);
  return out;
}

double myopic_rho(const BidVector& bids) {
  bids.validate();
  double first = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < bids.provider_count(); ++n) {
    const double b = bids.bid_of(n);
    if (b > first) {
      second = first;
      first = b;
    } else if (b > second) {
      second = b;
    }
  }
  if (second <= 0.0) {
    // Degenerate round: the ratio is unbounded (or undefined when the top
    // bid is also zero). Any sufficiently large factor gives the same
    // outcome, so use a large finite one.
    return first <= 0.0 ? 1.0 : 1e15;
  }
  return std::max(1.0, first / second);
}

double optimal_rho(std::span<const BidVector> history) {
  require(!history.empty(), "empty bid history");
  double mean_first = 0.0;
  double mean_second = 0.0;
  for (const BidVector& bids : history) {
    bids.validate();
    double first = -std::numeric_limits<double>::infinity();
    double second = -std::numeric_limits<double>::infinity();
    for (int n = 0; n < bids.provider_count(); ++n) {
      const double b = bids.bid_of(n);
      if (b > first) {
        second = first;
        first = b;
      } else if (b > second) {
        second = b;
      }
    }
    mean_first += first;
    mean_second += second;
  }
  mean_first /= static_cast<double>(history.size());
  mean_second /= static_cast<double>(history.size());
  if (mean_second <= 0.0) return mean_first <= 0.0 ? 1.0 : 1e15;
  return std::max(1.0, mean_first / mean_second);
}

TruthfulnessResult check_truthfulness(const MarketInstance& market, double rho,
                                      std::span<const double> deviation_grid) {
  require(market.valuations.size() >= 2, "market needs the UAV and at least one BS");
  require(rho >= 1.0, "price scaling factor must be at least 1");
  require(!deviation_grid.empty(), "empty deviation grid");

  BidVector truthful;
  truthful.uav_bid = market.uav_contracted_bid;
  truthful.bs_bids.assign(market.valuations.begin() + 1, market.valuations.end());

  TruthfulnessResult result;
  for (int n = 1; n < truthful.provider_count(); ++n) {
    const double value = market.valuations[static_cast<std::size_t>(n)];
    const AuctionOutcome honest = msb_run(truthful, rho);
    const double honest_utility =
        honest.winner == n ? value - honest.payments[static_cast<std::size_t>(n)] : 0.0;

    BidVector deviated = truthful;
    for (const double d : deviation_grid) {
      if (!(d >= 0.0)) throw std::domain_error("deviation bids must be non-negative");
      deviated.bs_bids[static_cast<std::size_t>(n - 1)] = d;
      const AuctionOutcome out = msb_run(deviated, rho);
      const double utility =
          out.winner == n ? value - out.payments[static_cast<std::size_t>(n)] : 0.0;
      if (utility > honest_utility) {
        return {false, n, d, honest_utility, utility};
      }
    }
  }
  return result;
}

}  // namespace dmsb::auction
