#ifndef HIHTP_HIHTP_HPP
#define HIHTP_HIHTP_HPP

// Umbrella header.
#include "hihtp/types.hpp"
#include "hihtp/projection.hpp"
#include "hihtp/convolution.hpp"
#include "hihtp/codebook.hpp"
#include "hihtp/operators.hpp"
#include "hihtp/rng.hpp"
#include "hihtp/ensembles.hpp"
#include "hihtp/solver.hpp"
#include "hihtp/experiments.hpp"
#include "hihtp/serialize.hpp"
#include "hihtp/config.hpp"
#include "hihtp/plot.hpp"

#endif  // HIHTP_HIHTP_HPP
