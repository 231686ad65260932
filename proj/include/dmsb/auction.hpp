#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dmsb::auction {

inline constexpr int kUavId = 0;

/// One round of submitted bids. Index 0 is the UAV's contracted payment;
/// ground base stations follow in id order.
struct BidVector {
  double uav_bid = 0.0;
  std::vector<double> bs_bids;

  int provider_count() const { return 1 + static_cast<int>(bs_bids.size()); }
  double bid_of(int id) const;
  void validate() const;
};

/// Result of an allocation rule: exactly one winner, losers pay nothing.
struct AuctionOutcome {
  int winner = kUavId;
  std::vector<int> allocation;    // 0/1 per provider, exactly one 1
  std::vector<double> payments;   // per provider, zero for losers
  double uav_surplus = 0.0;       // realized surplus parts, see realize_surplus
  double bs_surplus = 0.0;
  double price_scale = 1.0;       // rho in effect (1 for rules without one)
};

struct SurplusWeights {
  double zeta = 1.0;  // weight on the UAV's surplus in the objective
  void validate() const;
};

/// Modified second-bid allocation: ground BS n wins iff its bid strictly
/// exceeds rho times the best competing bid (UAV bid included); exact ties
/// lose. If no BS clears the threshold the UAV wins. Requires rho >= 1,
/// which guarantees at most one BS can clear it.
AuctionOutcome msb_allocate(const BidVector& bids, double rho);

/// Fills payments for an outcome produced by msb_allocate on the same
/// inputs: a winning BS pays rho times the best competing bid, a winning
/// UAV pays its contracted bid, losers pay zero.
void msb_price(const BidVector& bids, double rho, AuctionOutcome& outcome);

/// Allocation plus pricing in one call.
AuctionOutcome msb_run(const BidVector& bids, double rho);

/// Critical payment psi(b_-n; rho) = rho * max(b_-n): the bid level a
/// performance bidder must strictly exceed to win, and the price it then
/// pays. Homogeneous of degree one in the competing bids.
double critical_payment(std::span<const double> other_bids, double rho);

struct ContractedBid {
  double bid = 0.0;
  std::size_t grid_index = 0;
  double expected_profit = 0.0;
};

/// Grid search for the UAV's contracted payment: maximizes the empirical
/// mean of (v0 - vmax) * 1(vmax <= b) over paired historical samples.
/// Ties break toward the smallest grid value.
ContractedBid uav_contracted_bid(std::span<const double> vmax_samples,
                                 std::span<const double> v0_samples,
                                 std::span<const double> grid);

/// Uniform grid over [0, max(vmax_samples)], endpoint included.
std::vector<double> make_bid_grid(std::span<const double> vmax_samples, std::size_t points = 1000);

/// Fills the outcome's realized surplus parts from the winners' valuations.
void realize_surplus(AuctionOutcome& outcome, std::span<const double> valuations);

/// Weighted total surplus zeta * v0 * X_uav + sum_n v_n * X_n. Exactly one
/// indicator is set, so this is the winner's valuation, weighted by zeta
/// when the UAV wins.
double surplus(const AuctionOutcome& outcome, std::span<const double> valuations,
               const SurplusWeights& weights);

/// Second-price auction over all providers; ties go to the lowest id.
AuctionOutcome spa(const BidVector& bids);

/// Per-round scaling rule: max(1, highest bid / second-highest bid).
double myopic_rho(const BidVector& bids);

/// Historical scaling rule: max(1, mean of round-highest bids / mean of
/// round-second-highest bids) over the whole supplied history.
double optimal_rho(std::span<const BidVector> history);

/// Valuations of one auction round; index 0 is the UAV's true valuation,
/// which differs from its contracted bid.
struct MarketInstance {
  std::vector<double> valuations;
  double uav_contracted_bid = 0.0;
};

struct TruthfulnessResult {
  bool passed = true;
  int bidder = -1;             // first violating performance bidder, if any
  double deviation = 0.0;      // the profitable deviating bid
  double truthful_utility = 0.0;
  double deviated_utility = 0.0;
};

/// Probes every performance bidder with each deviation on the grid while
/// all other bids stay truthful. Utility is (v_n - payment) when winning
/// and zero otherwise. Returns the first deviation that beats truthful
/// bidding, or a pass.
TruthfulnessResult check_truthfulness(const MarketInstance& market, double rho,
                                      std::span<const double> deviation_grid);

}  // namespace dmsb::auction
