#pragma once

#include <cstddef>

#include "treestat/types.hpp"

namespace treestat::analytic {

/// Which computation path to use for probabilities and ratios.
///
/// closed_form evaluates the emitter/noise generating function analytically
/// and requires a uniform emitter efficiency; generic expands the truncated
/// photon-number distribution and sums sigma-expectations term by term and
/// works for arbitrary (e.g. per-emitter) efficiencies.  automatic picks
/// closed_form whenever it is available.
enum class Route { automatic, closed_form, generic };

/// Photon-number distribution of the emitter ensemble alone (no noise):
/// Binomial(M, eta) for a uniform ensemble, Poisson-binomial otherwise.
PhotonNumberDistribution sps_distribution(const EmitterEnsemble& ensemble);

/// Convolution of sps_distribution with the Poissonian background, truncated
/// at the smallest nmax whose Poisson tail mass falls below `tail_cutoff`.
PhotonNumberDistribution mixed_distribution(const EmitterEnsemble& ensemble,
                                            const NoiseModel& noise,
                                            double tail_cutoff = kDefaultTailCutoff);

/// E[sigma^n] under `dist`, plus an upper bound on the truncation error
/// contributed by the distribution's discarded tail.
struct SigmaExpectation {
  double value = 0.0;
  double tail_uncertainty = 0.0;
};

/// Expectation of sigma^n for sigma in [0,1]; evaluated by Horner's scheme.
SigmaExpectation expectation_sigma(const PhotonNumberDistribution& dist, double sigma);

/// Probability that no channel of `subset` clicks.  The empty subset gives 1.
double p0_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                 const DetectorTree& tree, ChannelMask subset,
                 Route route = Route::automatic);

/// Probability that no channel at all clicks.
double p0_all(const EmitterEnsemble& ensemble, const NoiseModel& noise,
              const DetectorTree& tree, Route route = Route::automatic);

/// Probability that one given channel does not click (other channels free).
double p0_single(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                 const DetectorTree& tree, std::size_t channel,
                 Route route = Route::automatic);

/// Probability that every channel of `subset` clicks (inclusion-exclusion
/// over its sub-subsets).  The empty subset gives 1.
double pclick_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                     const DetectorTree& tree, ChannelMask subset,
                     Route route = Route::automatic);

/// Probability that all channels click simultaneously.
double pclick_nfold(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                    const DetectorTree& tree, Route route = Route::automatic);

/// theta over `subset`: P(no click on subset) / prod_i P(no click on i).
/// Values below 1 certify nonclassicality of the source.  Independent of the
/// Poissonian background by construction.
double theta_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                    const DetectorTree& tree, ChannelMask subset,
                    Route route = Route::automatic);

/// theta over the first `order` channels.
double theta_order(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                   const DetectorTree& tree, std::size_t order,
                   Route route = Route::automatic);

/// Zero-delay autocorrelation proxy over `subset`:
/// P(all of subset click) / prod_i P(i clicks).  Exactly 1 for pure
/// Poissonian input (M = 0); below 1 signals antibunching.
double g_subset(const EmitterEnsemble& ensemble, const NoiseModel& noise,
                const DetectorTree& tree, ChannelMask subset,
                Route route = Route::automatic);

/// g over the first `order` channels.
double g_order(const EmitterEnsemble& ensemble, const NoiseModel& noise,
               const DetectorTree& tree, std::size_t order,
               Route route = Route::automatic);

}  // namespace treestat::analytic
