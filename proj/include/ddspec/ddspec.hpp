#pragma once

#include "ddspec/bessel.hpp"
#include "ddspec/coherence.hpp"
#include "ddspec/config.hpp"
#include "ddspec/csv.hpp"
#include "ddspec/errors.hpp"
#include "ddspec/estimate.hpp"
#include "ddspec/noise.hpp"
#include "ddspec/parallel.hpp"
#include "ddspec/rng.hpp"
#include "ddspec/schedule.hpp"
