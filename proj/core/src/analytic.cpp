#include "treestat/analytic.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace treestat::analytic {

namespace {

constexpr std::size_t kMaxPoissonTerms = 1u << 20;

// Truncation used when the generic route expands the photon-number
// distribution internally.  Much tighter than kDefaultTailCutoff because the
// inclusion-exclusion sums and the theta/g ratios can divide by small
// coincidence probabilities, amplifying any discarded tail mass.
constexpr double kRouteTailCutoff = 1e-16;

// E[(1-tau)^n] for Binomial(M, eta) (x) Poisson(lambda); exact for uniform
// ensembles since the generating function factorizes per emitter.
double pgf_uniform(std::size_t emitters, double eta, double lambda, double tau) {
  return std::pow(1.0 - eta * tau, static_cast<double>(emitters)) * std::exp(-lambda * tau);
}

bool closed_form_available(const EmitterEnsemble& ensemble) { return ensemble.uniform(); }

Route resolve(Route route, const EmitterEnsemble& ensemble) {
  if (route == Route::automatic) {
    return closed_form_available(ensemble) ? Route::closed_form : Route::generic;
  }
  if (route == Route::closed_form && !closed_form_available(ensemble)) {
    throw std::invalid_argument(
        "closed-form route requires a uniform emitter efficiency");
  }
  return route;
}

void check_inputs(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                  const DetectorTree& tree) {
  ensemble.validate();
  noise.validate();
  tree.validate();
}

double p0_subset_on(const PhotonNumberDistribution& dist, const DetectorTree& tree,
                    ChannelMask subset) {
  return clamp_probability(
      expectation_sigma(dist, 1.0 - tree.subset_transmission(subset)).value);
}

double p0_subset_closed(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                        const DetectorTree& tree, ChannelMask subset) {
  const double tau = tree.subset_transmission(subset);
  return clamp_probability(
      pgf_uniform(ensemble.emitters, ensemble.efficiency, noise.mean_photons, tau));
}

// Inclusion-exclusion over sub-subsets of `subset`, with p0 supplied by `p0`.
template <typename P0>
double pclick_by_inclusion_exclusion(ChannelMask subset, P0&& p0) {
  double sum = 0.0;
  ChannelMask t = subset;
  while (true) {
    const int bits = std::popcount(t);
    sum += (bits % 2 == 0 ? 1.0 : -1.0) * p0(t);
    if (t == 0) break;
    t = (t - 1) & subset;
  }
  return clamp_probability(sum);
}

}  // namespace

PhotonNumberDistribution sps_distribution(const EmitterEnsemble& ensemble) {
  ensemble.validate();
  std::vector<double> probs{1.0};
  probs.reserve(ensemble.emitters + 1);
  for (std::size_t alpha = 0; alpha < ensemble.emitters; ++alpha) {
    const double eta = ensemble.efficiency_of(alpha);
    probs.push_back(0.0);
    for (std::size_t n = probs.size() - 1; n > 0; --n) {
      probs[n] = probs[n] * (1.0 - eta) + probs[n - 1] * eta;
    }
    probs[0] *= 1.0 - eta;
  }
  return PhotonNumberDistribution{std::move(probs), 0.0};
}

PhotonNumberDistribution mixed_distribution(const EmitterEnsemble& ensemble,
                                            const NoiseModel& noise, double tail_cutoff) {
  ensemble.validate();
  noise.validate();
  if (!(tail_cutoff > 0.0 && tail_cutoff < 1.0)) {
    throw std::invalid_argument("tail cutoff must lie in (0,1)");
  }

  const PhotonNumberDistribution sps = sps_distribution(ensemble);
  const double lambda = noise.mean_photons;

  // Poisson pmf truncated once a rigorous bound on the remaining tail mass
  // drops below the cutoff.  Past the mode the terms decay at least
  // geometrically with ratio lambda/(k+1), so the omitted tail is bounded by
  // next/(1 - ratio); summing 1 - cumulative instead would saturate at the
  // floating-point floor and never reach tight cutoffs.
  std::vector<double> poisson{std::exp(-lambda)};
  if (poisson.front() == 0.0) {
    throw std::invalid_argument("noise mean too large to expand");
  }
  while (true) {
    const double count = static_cast<double>(poisson.size());
    const double next = poisson.back() * lambda / count;
    if (count > lambda && next / (1.0 - lambda / (count + 1.0)) < tail_cutoff) break;
    if (poisson.size() >= kMaxPoissonTerms) {
      throw std::runtime_error("poisson truncation did not converge");
    }
    poisson.push_back(next);
  }

  std::vector<double> probs(sps.probs.size() + poisson.size() - 1, 0.0);
  for (std::size_t m = 0; m < sps.probs.size(); ++m) {
    for (std::size_t k = 0; k < poisson.size(); ++k) {
      probs[m + k] += sps.probs[m] * poisson[k];
    }
  }
  double total = 0.0;
  for (double p : probs) total += p;
  return PhotonNumberDistribution{std::move(probs), std::max(0.0, 1.0 - total)};
}

SigmaExpectation expectation_sigma(const PhotonNumberDistribution& dist, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) {
    throw std::invalid_argument("sigma must lie in [0,1]");
  }
  dist.validate();
  double value = 0.0;
  for (std::size_t n = dist.probs.size(); n-- > 0;) {
    value = value * sigma + dist.probs[n];
  }
  return SigmaExpectation{value,
                          dist.tail_bound * std::pow(sigma, static_cast<double>(dist.probs.size()))};
}

double p0_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                 const DetectorTree& tree, ChannelMask subset, Route route) {
  check_inputs(ensemble, noise, tree);
  if (subset == 0) return 1.0;
  if (resolve(route, ensemble) == Route::closed_form) {
    return p0_subset_closed(ensemble, noise, tree, subset);
  }
  return p0_subset_on(mixed_distribution(ensemble, noise, kRouteTailCutoff), tree, subset);
}

double p0_all(const EmitterEnsemble& ensemble, const NoiseModel& noise,
              const DetectorTree& tree, Route route) {
  return p0_subset(ensemble, noise, tree, full_mask(tree.channels()), route);
}

double p0_single(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                 const DetectorTree& tree, std::size_t channel, Route route) {
  if (channel >= tree.channels()) throw std::invalid_argument("channel index out of range");
  return p0_subset(ensemble, noise, tree, ChannelMask{1} << channel, route);
}

double pclick_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                     const DetectorTree& tree, ChannelMask subset, Route route) {
  check_inputs(ensemble, noise, tree);
  if (subset == 0) return 1.0;
  const int order = std::popcount(subset);

  // Without background light at most M photons arrive, so fewer photons than
  // subset channels cannot produce the coincidence; return an exact zero
  // instead of the rounding residue of the alternating sum.
  if (noise.mean_photons == 0.0 && ensemble.emitters < static_cast<std::size_t>(order)) {
    return 0.0;
  }

  if (resolve(route, ensemble) == Route::closed_form) {
    return pclick_by_inclusion_exclusion(subset, [&](ChannelMask t) {
      return p0_subset_closed(ensemble, noise, tree, t);
    });
  }
  const PhotonNumberDistribution dist = mixed_distribution(ensemble, noise, kRouteTailCutoff);
  return pclick_by_inclusion_exclusion(
      subset, [&](ChannelMask t) { return p0_subset_on(dist, tree, t); });
}

double pclick_nfold(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                    const DetectorTree& tree, Route route) {
  return pclick_subset(ensemble, noise, tree, full_mask(tree.channels()), route);
}

double theta_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                    const DetectorTree& tree, ChannelMask subset, Route route) {
  check_inputs(ensemble, noise, tree);
  if (subset == 0) return 1.0;
  if (ensemble.emitters == 0) return 1.0;

  const Route resolved = resolve(route, ensemble);
  if (resolved == Route::closed_form) {
    // The Poissonian factors exp(-lambda tau) cancel exactly between the
    // numerator and the product of singles (tau_S = sum of tau_i), so the
    // ratio is evaluated without lambda.
    const double eta = ensemble.efficiency;
    const double M = static_cast<double>(ensemble.emitters);
    double numerator = std::pow(1.0 - eta * tree.subset_transmission(subset), M);
    double denominator = 1.0;
    for (std::size_t i = 0; i < tree.channels(); ++i) {
      if (!(subset & (ChannelMask{1} << i))) continue;
      denominator *= std::pow(1.0 - eta * tree.arm_transmission(i), M);
    }
    if (denominator == 0.0) {
      throw UndefinedEstimator("theta undefined: a single-channel no-click probability is 0");
    }
    const double theta = numerator / denominator;
#ifndef NDEBUG
    {
      double with_lambda = p0_subset_closed(ensemble, noise, tree, subset);
      for (std::size_t i = 0; i < tree.channels(); ++i) {
        if (!(subset & (ChannelMask{1} << i))) continue;
        with_lambda /= p0_subset_closed(ensemble, noise, tree, ChannelMask{1} << i);
      }
      assert(std::abs(with_lambda - theta) <= 1e-9 * std::max(1.0, theta));
    }
#endif
    return theta;
  }

  const PhotonNumberDistribution dist = mixed_distribution(ensemble, noise, kRouteTailCutoff);
  const double numerator = p0_subset_on(dist, tree, subset);
  double denominator = 1.0;
  for (std::size_t i = 0; i < tree.channels(); ++i) {
    if (!(subset & (ChannelMask{1} << i))) continue;
    denominator *= p0_subset_on(dist, tree, ChannelMask{1} << i);
  }
  if (denominator == 0.0) {
    throw UndefinedEstimator("theta undefined: a single-channel no-click probability is 0");
  }
  return numerator / denominator;
}

double theta_order(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                   const DetectorTree& tree, std::size_t order, Route route) {
  if (order < 1 || order > tree.channels()) {
    throw std::invalid_argument("order must lie in [1, channels]");
  }
  return theta_subset(ensemble, noise, tree, full_mask(order), route);
}

double g_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                const DetectorTree& tree, ChannelMask subset, Route route) {
  check_inputs(ensemble, noise, tree);
  if (subset == 0) return 1.0;
  const Route resolved = resolve(route, ensemble);

  if (ensemble.emitters == 0) {
    // Pure Poissonian input clicks channels independently, so the ratio is
    // exactly 1 at every order whenever it is defined at all.
    for (std::size_t i = 0; i < tree.channels(); ++i) {
      if (!(subset & (ChannelMask{1} << i))) continue;
      if (noise.mean_photons * tree.arm_transmission(i) == 0.0) {
        throw UndefinedEstimator("g undefined: a single-channel click probability is 0");
      }
    }
    return 1.0;
  }

  double numerator = 0.0;
  double denominator = 1.0;
  if (resolved == Route::closed_form) {
    numerator = pclick_subset(ensemble, noise, tree, subset, Route::closed_form);
    for (std::size_t i = 0; i < tree.channels(); ++i) {
      if (!(subset & (ChannelMask{1} << i))) continue;
      denominator *= 1.0 - p0_subset_closed(ensemble, noise, tree, ChannelMask{1} << i);
    }
  } else {
    const PhotonNumberDistribution dist = mixed_distribution(ensemble, noise, kRouteTailCutoff);
    numerator = pclick_subset(ensemble, noise, tree, subset, Route::generic);
    for (std::size_t i = 0; i < tree.channels(); ++i) {
      if (!(subset & (ChannelMask{1} << i))) continue;
      denominator *= 1.0 - p0_subset_on(dist, tree, ChannelMask{1} << i);
    }
  }
  if (denominator == 0.0) {
    throw UndefinedEstimator("g undefined: a single-channel click probability is 0");
  }
  return numerator / denominator;
}

double g_order(const EmitterEnsemble& ensemble, const NoiseModel& noise,
               const DetectorTree& tree, std::size_t order, Route route) {
  if (order < 1 || order > tree.channels()) {
    throw std::invalid_argument("order must lie in [1, channels]");
  }
  return g_subset(ensemble, noise, tree, full_mask(order), route);
}

}  // namespace treestat::analytic
