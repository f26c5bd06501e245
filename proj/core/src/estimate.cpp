#include "treestat/estimate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "treestat/rng.hpp"

namespace treestat::estimator {

namespace {

void check_subset(const CountSummary& counts, ChannelMask subset) {
  if (subset == 0) throw std::invalid_argument("channel subset must be nonempty");
  if ((subset >> counts.channel_count) != 0) {
    throw std::invalid_argument("subset references unknown channels");
  }
  if (counts.n_trials == 0) throw std::invalid_argument("need at least one trial");
}

// Inclusive click probabilities over the local masks of a cell table:
// probs[t] = P(all channels of t click) = sum of cells over supersets of t.
std::vector<double> local_probs(const std::vector<std::uint64_t>& cells, std::uint64_t n) {
  std::vector<double> probs(cells.size(), 0.0);
  const std::size_t full = cells.size() - 1;
  for (std::size_t t = 0; t < cells.size(); ++t) {
    std::uint64_t sum = 0;
    for (std::size_t b = t;; b = (b + 1) | t) {
      sum += cells[b];
      if (b == full) break;
    }
    probs[t] = static_cast<double>(sum) / static_cast<double>(n);
  }
  probs[0] = 1.0;
  return probs;
}

// Multinomial resample of a cell table via chained conditional binomials.
std::vector<std::uint64_t> resample_cells(const std::vector<std::uint64_t>& cells,
                                          std::uint64_t n, PulseRng& rng) {
  std::vector<std::uint64_t> out(cells.size(), 0);
  std::uint64_t remaining = n;
  double mass_left = 1.0;
  for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
    if (remaining == 0 || mass_left <= 0.0) break;
    const double cell_mass = static_cast<double>(cells[i]) / static_cast<double>(n);
    const double p = std::clamp(cell_mass / mass_left, 0.0, 1.0);
    std::binomial_distribution<std::int64_t> binomial(static_cast<std::int64_t>(remaining), p);
    const auto draw = static_cast<std::uint64_t>(binomial(rng));
    out[i] = draw;
    remaining -= draw;
    mass_left -= cell_mass;
  }
  out.back() += remaining;
  return out;
}

enum class Kind { theta, g };

double evaluate_local(Kind kind, const std::vector<double>& probs) {
  const auto full = static_cast<ChannelMask>(probs.size() - 1);
  return kind == Kind::theta ? theta_from_probs(probs, full) : g_from_probs(probs, full);
}

// Delta-method standard error from the multinomial covariance of the cells.
double propagation_sigma(Kind kind, const std::vector<std::uint64_t>& cells, std::uint64_t n) {
  const std::size_t size = cells.size();
  const std::size_t full = size - 1;
  const std::size_t k = static_cast<std::size_t>(std::popcount(full));

  std::vector<double> q(size);
  for (std::size_t b = 0; b < size; ++b) {
    q[b] = static_cast<double>(cells[b]) / static_cast<double>(n);
  }
  std::vector<double> click(k, 0.0);  // P_i = P(channel i clicks)
  for (std::size_t b = 0; b < size; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      if (b & (std::size_t{1} << i)) click[i] += q[b];
    }
  }

  double scale = 1.0;  // 1/prod(1-P_i) for theta, 1/prod(P_i) for g
  for (std::size_t i = 0; i < k; ++i) {
    const double factor = kind == Kind::theta ? 1.0 - click[i] : click[i];
    if (factor == 0.0) throw UndefinedEstimator("degenerate single-channel probability");
    scale /= factor;
  }

  // gradient d_b = d(estimate)/d(q_b); variance by the multinomial identity
  // Var = (sum q d^2 - (sum q d)^2) / n.
  double mean_d = 0.0;
  double mean_d2 = 0.0;
  for (std::size_t b = 0; b < size; ++b) {
    double inv_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(b & (std::size_t{1} << i))) continue;
      inv_sum += kind == Kind::theta ? 1.0 / (1.0 - click[i]) : 1.0 / click[i];
    }
    double d = 0.0;
    if (kind == Kind::theta) {
      d = scale * ((b == 0 ? 1.0 : 0.0) + q[0] * inv_sum);
    } else {
      d = scale * ((b == full ? 1.0 : 0.0) - q[full] * inv_sum);
    }
    mean_d += q[b] * d;
    mean_d2 += q[b] * d * d;
  }
  const double variance = std::max(0.0, mean_d2 - mean_d * mean_d) / static_cast<double>(n);
  return std::sqrt(variance);
}

double bootstrap_sigma(Kind kind, const std::vector<std::uint64_t>& cells, std::uint64_t n,
                       ChannelMask subset, const Options& options) {
  std::vector<double> replicas;
  replicas.reserve(static_cast<std::size_t>(options.bootstrap_rounds));
  for (int r = 0; r < options.bootstrap_rounds; ++r) {
    PulseRng rng(options.bootstrap_seed + subset, static_cast<std::uint64_t>(r));
    const std::vector<std::uint64_t> resampled = resample_cells(cells, n, rng);
    try {
      replicas.push_back(evaluate_local(kind, local_probs(resampled, n)));
    } catch (const UndefinedEstimator&) {
      // A replica with a silent (or saturated) channel carries no value for
      // the ratio; skip it.
    }
  }
  if (replicas.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : replicas) mean += v;
  mean /= static_cast<double>(replicas.size());
  double ss = 0.0;
  for (double v : replicas) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(replicas.size() - 1));
}

Estimate estimate_ratio(Kind kind, const CountSummary& counts, ChannelMask subset,
                        const Options& options) {
  check_subset(counts, subset);
  const std::vector<std::uint64_t> cells = subset_cell_counts(counts, subset);
  const std::vector<double> probs = local_probs(cells, counts.n_trials);

  Estimate estimate;
  try {
    estimate.value = evaluate_local(kind, probs);
  } catch (const UndefinedEstimator& error) {
    estimate.defined = false;
    estimate.note = error.what();
    return estimate;
  }
  estimate.defined = true;
  if (options.method == UncertaintyMethod::propagation) {
    estimate.sigma = propagation_sigma(kind, cells, counts.n_trials);
  } else {
    estimate.sigma = bootstrap_sigma(kind, cells, counts.n_trials, subset, options);
  }
  return estimate;
}

Aggregate aggregate_estimates(const std::vector<const Estimate*>& estimates,
                              bool inverse_variance) {
  Aggregate aggregate;
  std::vector<const Estimate*> usable;
  for (const Estimate* e : estimates) {
    if (e->defined) usable.push_back(e);
  }
  if (usable.empty()) return aggregate;
  aggregate.defined = true;
  aggregate.used = static_cast<int>(usable.size());
  const auto m = static_cast<double>(usable.size());

  if (inverse_variance && std::all_of(usable.begin(), usable.end(),
                                      [](const Estimate* e) { return e->sigma > 0.0; })) {
    double weight_sum = 0.0;
    double weighted = 0.0;
    for (const Estimate* e : usable) {
      const double w = 1.0 / (e->sigma * e->sigma);
      weight_sum += w;
      weighted += w * e->value;
    }
    aggregate.mean = weighted / weight_sum;
    aggregate.sem = std::sqrt(1.0 / weight_sum);
    return aggregate;
  }

  double mean = 0.0;
  for (const Estimate* e : usable) mean += e->value;
  mean /= m;
  double propagated = 0.0;
  for (const Estimate* e : usable) propagated += e->sigma * e->sigma;
  propagated = std::sqrt(propagated) / m;
  double scatter = 0.0;
  if (usable.size() >= 2) {
    double ss = 0.0;
    for (const Estimate* e : usable) ss += (e->value - mean) * (e->value - mean);
    scatter = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
  }
  aggregate.mean = mean;
  // The scatter term sees combination-to-combination correlations the
  // per-combination sigmas cannot; taking the larger of the two keeps the
  // quoted error conservative.
  aggregate.sem = std::max(propagated, scatter);
  return aggregate;
}

Verdict verdict_against_unity(const Aggregate& aggregate, double k_sigma) {
  if (!aggregate.defined) return Verdict::inconclusive;
  if (aggregate.mean + k_sigma * aggregate.sem < 1.0) return Verdict::nonclassical;
  if (aggregate.mean - k_sigma * aggregate.sem > 1.0) return Verdict::classical;
  return Verdict::inconclusive;
}

void finalize_order(OrderReport& report, double k_sigma, bool inverse_variance) {
  std::vector<const Estimate*> thetas;
  std::vector<const Estimate*> gs;
  for (const Combination& combo : report.combinations) {
    thetas.push_back(&combo.theta);
    gs.push_back(&combo.g);
  }
  report.theta_aggregate = aggregate_estimates(thetas, inverse_variance);
  report.g_aggregate = aggregate_estimates(gs, inverse_variance);
  report.verdict = report.theta_aggregate.defined
                       ? verdict_against_unity(report.theta_aggregate, k_sigma)
                       : verdict_against_unity(report.g_aggregate, k_sigma);
}

void classify_report(EstimateReport& report) {
  report.classification = Verdict::inconclusive;
  report.single_emitter_candidate = false;
  const OrderReport* base = nullptr;
  for (const OrderReport& order : report.orders) {
    if (order.order == 2) base = &order;
  }
  if (base == nullptr && !report.orders.empty()) base = &report.orders.front();
  if (base == nullptr) return;
  report.classification = base->verdict;
  if (base->order == 2 && base->g_aggregate.defined) {
    const Aggregate& g = base->g_aggregate;
    report.single_emitter_candidate = g.mean + report.k_sigma * g.sem < 0.5;
  }
}

}  // namespace

std::vector<double> probabilities(const CountSummary& counts) {
  counts.validate();
  if (counts.n_trials == 0) throw std::invalid_argument("need at least one trial");
  std::vector<double> probs(counts.counts.size());
  for (std::size_t m = 0; m < probs.size(); ++m) {
    probs[m] = static_cast<double>(counts.counts[m]) / static_cast<double>(counts.n_trials);
  }
  probs[0] = 1.0;
  return probs;
}

double theta_from_probs(const std::vector<double>& probs, ChannelMask subset) {
  if (subset == 0 || subset >= probs.size()) {
    throw std::invalid_argument("subset out of range of the probability table");
  }
  double numerator = 0.0;
  ChannelMask t = subset;
  while (true) {
    numerator += (std::popcount(t) % 2 == 0 ? 1.0 : -1.0) * probs[t];
    if (t == 0) break;
    t = (t - 1) & subset;
  }
  numerator = clamp_probability(numerator);
  double denominator = 1.0;
  for (std::size_t i = 0; (ChannelMask{1} << i) <= subset; ++i) {
    const ChannelMask bit = ChannelMask{1} << i;
    if (subset & bit) denominator *= 1.0 - probs[bit];
  }
  if (denominator == 0.0) {
    throw UndefinedEstimator("theta undefined: a channel clicked on every trial");
  }
  return numerator / denominator;
}

double g_from_probs(const std::vector<double>& probs, ChannelMask subset) {
  if (subset == 0 || subset >= probs.size()) {
    throw std::invalid_argument("subset out of range of the probability table");
  }
  double denominator = 1.0;
  for (std::size_t i = 0; (ChannelMask{1} << i) <= subset; ++i) {
    const ChannelMask bit = ChannelMask{1} << i;
    if (subset & bit) denominator *= probs[bit];
  }
  if (denominator == 0.0) {
    throw UndefinedEstimator("g undefined: a channel never clicked");
  }
  return probs[subset] / denominator;
}

std::vector<std::uint64_t> subset_cell_counts(const CountSummary& counts, ChannelMask subset) {
  check_subset(counts, subset);
  const std::vector<std::size_t> channels = channels_of(subset);
  const std::size_t k = channels.size();
  const std::size_t size = std::size_t{1} << k;

  // Global mask for each local pattern.
  std::vector<ChannelMask> expand(size, 0);
  for (std::size_t b = 0; b < size; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      if (b & (std::size_t{1} << i)) expand[b] |= ChannelMask{1} << channels[i];
    }
  }

  // Moebius inversion: exclusive(b) = sum_{c supseteq b} (-1)^{|c|-|b|} inclusive(c).
  std::vector<std::uint64_t> cells(size, 0);
  for (std::size_t b = 0; b < size; ++b) {
    std::int64_t value = 0;
    const std::size_t bits = static_cast<std::size_t>(std::popcount(b));
    for (std::size_t c = b;; c = (c + 1) | b) {
      const std::size_t extra = static_cast<std::size_t>(std::popcount(c)) - bits;
      const auto term = static_cast<std::int64_t>(counts.at(expand[c]));
      value += (extra % 2 == 0) ? term : -term;
      if (c == size - 1) break;
    }
    if (value < 0) {
      throw std::invalid_argument("counts are inconsistent with a multinomial outcome");
    }
    cells[b] = static_cast<std::uint64_t>(value);
  }
  return cells;
}

Estimate theta_k(const CountSummary& counts, ChannelMask subset, const Options& options) {
  return estimate_ratio(Kind::theta, counts, subset, options);
}

Estimate g_k(const CountSummary& counts, ChannelMask subset, const Options& options) {
  return estimate_ratio(Kind::g, counts, subset, options);
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::nonclassical:
      return "nonclassical";
    case Verdict::classical:
      return "classical";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

EstimateReport analyze(const CountSummary& counts, const Options& options) {
  counts.validate();
  if (counts.n_trials == 0) throw std::invalid_argument("need at least one trial");

  std::vector<std::size_t> orders(options.orders);
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());

  std::vector<OrderEstimates> estimates;
  for (std::size_t order : orders) {
    if (order < 2 || order > counts.channel_count) continue;
    OrderEstimates entry;
    entry.order = order;
    const auto all = static_cast<ChannelMask>(counts.counts.size() - 1);
    for (ChannelMask mask = 1; mask <= all; ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != order) continue;
      Combination combo;
      combo.channels = mask;
      combo.theta = theta_k(counts, mask, options);
      combo.g = g_k(counts, mask, options);
      entry.combinations.push_back(std::move(combo));
    }
    estimates.push_back(std::move(entry));
  }

  EstimateReport report =
      aggregate_and_classify(estimates, options.k_sigma, options.inverse_variance);
  report.n_trials = counts.n_trials;
  report.channel_count = counts.channel_count;
  return report;
}

EstimateReport aggregate_and_classify(const std::vector<OrderEstimates>& estimates,
                                      double k_sigma, bool inverse_variance) {
  if (!(k_sigma > 0.0)) throw std::invalid_argument("k_sigma must be > 0");
  EstimateReport report;
  report.k_sigma = k_sigma;
  for (const OrderEstimates& entry : estimates) {
    OrderReport order;
    order.order = entry.order;
    order.combinations = entry.combinations;
    finalize_order(order, k_sigma, inverse_variance);
    report.orders.push_back(std::move(order));
  }
  std::sort(report.orders.begin(), report.orders.end(),
            [](const OrderReport& a, const OrderReport& b) { return a.order < b.order; });
  classify_report(report);
  return report;
}

}  // namespace treestat::estimator
