#ifndef SISC_SISC_HPP
#define SISC_SISC_HPP

#include "sisc/engine.hpp"
#include "sisc/errors.hpp"
#include "sisc/gold.hpp"
#include "sisc/io/feed.hpp"
#include "sisc/matrix.hpp"
#include "sisc/models/ar1.hpp"
#include "sisc/models/invasion.hpp"
#include "sisc/rng.hpp"
#include "sisc/stats.hpp"
#include "sisc/weights.hpp"

#endif
